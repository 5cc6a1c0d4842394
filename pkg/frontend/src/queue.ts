// Validation queue screen: pending artifacts for the logged-in expert,
// provenance excerpt for the selected one, Approve / Reject / Edit verdicts.
// Decisions remove optimistically and roll back on failure; a 409 (decided
// elsewhere) refreshes the whole queue. Edit submits stay disabled until the
// text differs from the original statement.

import {
  ApiError,
  fetchQueue,
  postDecision,
  type ApiConfig,
} from "./api.js";
import type { PendingArtifact, Verdict } from "./types.js";

export interface QueueState {
  items: PendingArtifact[];
  selectedId: string | null;
  editText: string;
  notice: string;
  loading: boolean;
}

export function initialQueueState(): QueueState {
  return { items: [], selectedId: null, editText: "", notice: "", loading: false };
}

export class QueueView {
  readonly state: QueueState;

  constructor(
    private readonly root: HTMLElement,
    private readonly config: ApiConfig,
    private readonly expertId: string,
    state?: QueueState,
  ) {
    this.state = state ?? initialQueueState();
    this.render();
  }

  async refresh(): Promise<void> {
    this.state.loading = true;
    this.render();
    try {
      this.state.items = await fetchQueue(this.config, this.expertId);
      if (!this.state.items.some((a) => a.artifact_id === this.state.selectedId)) {
        this.state.selectedId = null;
        this.state.editText = "";
      }
    } finally {
      this.state.loading = false;
      this.render();
    }
  }

  select(artifactId: string): void {
    this.state.selectedId = artifactId;
    const item = this.state.items.find((a) => a.artifact_id === artifactId);
    this.state.editText = item ? item.statement : "";
    this.render();
  }

  async decide(verdict: Verdict): Promise<void> {
    const artifactId = this.state.selectedId;
    const position = this.state.items.findIndex((a) => a.artifact_id === artifactId);
    const item = position >= 0 ? this.state.items[position] : undefined;
    if (!artifactId || !item) return;
    const edited = verdict === "Edit" ? this.state.editText : undefined;

    // optimistic removal, rolled back if the server rejects the decision
    this.state.items.splice(position, 1);
    this.state.selectedId = null;
    this.state.notice = "";
    this.render();
    try {
      await postDecision(this.config, artifactId, verdict, edited);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // decided elsewhere: the queue is stale, reload it
        this.state.notice = "Already decided elsewhere; queue refreshed.";
        await this.refresh();
        return;
      }
      this.state.items.splice(position, 0, item);
      this.state.selectedId = artifactId;
      this.state.editText = verdict === "Edit" ? (edited ?? "") : item.statement;
      this.state.notice =
        error instanceof ApiError
          ? `${error.code}: ${error.message}`
          : `Request failed: ${String(error)}`;
      this.render();
    }
  }

  setEditText(text: string): void {
    this.state.editText = text;
    this.render();
  }

  render(): void {
    this.root.replaceChildren();
    if (this.state.notice) {
      const notice = el("div", "queue-notice");
      notice.textContent = this.state.notice;
      this.root.appendChild(notice);
    }
    const counter = el("div", "queue-count");
    counter.textContent = `${this.state.items.length} pending`;
    this.root.appendChild(counter);

    const list = el("ul", "queue-list");
    for (const item of this.state.items) {
      const row = el("li", "queue-item");
      if (item.artifact_id === this.state.selectedId) row.classList.add("selected");
      row.dataset.artifactId = item.artifact_id;
      const label = el("button", "queue-select") as HTMLButtonElement;
      label.textContent = `${item.artifact_type}: ${item.statement}`;
      label.addEventListener("click", () => this.select(item.artifact_id));
      row.appendChild(label);
      list.appendChild(row);
    }
    this.root.appendChild(list);

    const selected = this.state.items.find(
      (a) => a.artifact_id === this.state.selectedId,
    );
    if (selected) this.root.appendChild(this.renderInspector(selected));
  }

  private renderInspector(item: PendingArtifact): HTMLElement {
    const panel = el("div", "inspector");

    const statement = el("p", "inspector-statement");
    statement.textContent = item.statement;
    panel.appendChild(statement);

    const provenance = el("ul", "provenance");
    for (const link of item.provenance) {
      const row = el("li", "provenance-link");
      row.textContent = `doc ${link.doc_id} chunk ${link.chunk_id} [${link.char_span[0]}:${link.char_span[1]})`;
      provenance.appendChild(row);
    }
    panel.appendChild(provenance);

    const confidence = el("p", "raw-confidence");
    confidence.textContent = `raw confidence ${item.confidence.toFixed(2)}`;
    panel.appendChild(confidence);

    const approve = el("button", "approve") as HTMLButtonElement;
    approve.textContent = "Approve";
    approve.addEventListener("click", () => void this.decide("Approve"));
    const reject = el("button", "reject") as HTMLButtonElement;
    reject.textContent = "Reject";
    reject.addEventListener("click", () => void this.decide("Reject"));

    const editBox = el("textarea", "edit-text") as HTMLTextAreaElement;
    editBox.value = this.state.editText;
    editBox.addEventListener("input", () => this.setEditText(editBox.value));

    const edit = el("button", "edit-submit") as HTMLButtonElement;
    edit.textContent = "Submit edit";
    // invariant: Edit stays disabled until the text actually differs
    edit.disabled =
      this.state.editText.trim() === item.statement.trim() ||
      this.state.editText.trim() === "";
    edit.addEventListener("click", () => void this.decide("Edit"));

    panel.appendChild(approve);
    panel.appendChild(reject);
    panel.appendChild(editBox);
    panel.appendChild(edit);
    return panel;
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}
