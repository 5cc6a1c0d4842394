// Wire types, field-for-field with the service's JSON bodies.

export interface Citation {
  marker: number;
  artifact_id: string;
}

export interface Disclosure {
  confidence: number;
  capture_date: string;
  domain_tag: string;
  doc_id: string;
}

export interface GroundedResponse {
  query_id: string;
  answer: string;
  citations: Citation[];
  disclosure: Disclosure[];
  latency_ms: number;
  resolved_flag: boolean | null;
}

export interface ProvenanceLink {
  doc_id: string;
  chunk_id: string;
  char_span: [number, number];
}

export interface PendingArtifact {
  artifact_id: string;
  expert_id: string;
  artifact_type: string;
  statement: string;
  provenance: ProvenanceLink[];
  confidence: number;
  state: string;
  domain_tag: string;
  created_at: string;
}

export interface QueryRequest {
  question: string;
  k?: number;
  filter?: Record<string, unknown>;
}

export type Verdict = "Approve" | "Reject" | "Edit";
