// Fixture payloads replayed by the mocked HTTP layer. The grounded response
// mirrors the backend's golden output for the cavitation query (ids and
// values lifted from the fixture pipeline).

import type { GroundedResponse, PendingArtifact } from "../src/types.js";

export const CAVITATION_RESPONSE: GroundedResponse = {
  query_id: "afa7949ba17405ef474a2522af77ee26",
  answer:
    "Cavitation onset in a centrifugal pump correlates with suction pressure " +
    "falling below the fluid vapor margin [1]. Cavitation onset in a " +
    "centrifugal pump correlates with suction pressure falling below the " +
    "fluid vapor margin [2]. Torque the gland follower nuts in three passes " +
    "with a calibrated wrench and record the final values on the seal card [3].",
  citations: [
    { marker: 1, artifact_id: "9a2f79e60b1a5bce901ba04516f81cdd" },
    { marker: 2, artifact_id: "b029d0401fe0235e36c636601c1996ec" },
    { marker: 3, artifact_id: "2b27f904728400309a8e6a20654d3d12" },
  ],
  disclosure: [
    {
      confidence: 0.9,
      capture_date: "2025-02-11",
      domain_tag: "pump_maintenance",
      doc_id: "00b6e67a7a2acc2bc18060a7da1de808",
    },
    {
      confidence: 0.9,
      capture_date: "2024-12-02",
      domain_tag: "pump_maintenance",
      doc_id: "9fc8c6511a1da7c430c21f724601ecf4",
    },
    {
      confidence: 0.9,
      capture_date: "2025-03-12",
      domain_tag: "pump_maintenance",
      doc_id: "cc5654cbd06ac326327365b089ed5cd0",
    },
  ],
  latency_ms: 0.0,
  resolved_flag: null,
};

const TYPES = ["FactualClaim", "DecisionHeuristic", "AnomalyPattern", "BestPractice"];
const TAGS = ["pump_maintenance", "turbine_operations", "grid_protection"];

// The fixture corpus holds 47 pending artifacts after extraction.
export function pendingQueue(count = 47): PendingArtifact[] {
  const items: PendingArtifact[] = [];
  for (let i = 0; i < count; i += 1) {
    const hex = i.toString(16).padStart(32, "0");
    items.push({
      artifact_id: hex,
      expert_id: "e".repeat(32),
      artifact_type: TYPES[i % TYPES.length]!,
      statement: `Statement number ${i} awaiting expert review`,
      provenance: [
        {
          doc_id: "d".repeat(32),
          chunk_id: "c".repeat(32),
          char_span: [0, 40],
        },
      ],
      confidence: 0.5,
      state: "PendingValidation",
      domain_tag: TAGS[i % TAGS.length]!,
      created_at: "2026-01-05T09:00:00+00:00",
    });
  }
  return items;
}
