// Chat screen: question in, cited answer out. Every rendered answer shows
// its citation chips; a chip opens the disclosure panel (confidence,
// capture date, domain tag, doc id). The resolved toggle feeds the
// resolution-rate metric. A 403 renders the consent banner, not a generic
// error; network failures get a retry button.

import { ApiError, postFeedback, postQuery, type ApiConfig } from "./api.js";
import type { GroundedResponse, QueryRequest } from "./types.js";

export interface ChatMessage {
  request: QueryRequest;
  response: GroundedResponse | null;
  consentDenied: boolean;
  networkError: boolean;
  errorText: string;
  resolved: boolean | null;
}

export interface ChatState {
  messages: ChatMessage[];
  // open disclosure: which message and which citation marker, or null
  openDisclosure: { message: number; marker: number } | null;
  busy: boolean;
}

export function initialChatState(): ChatState {
  return { messages: [], openDisclosure: null, busy: false };
}

export class ChatView {
  readonly state: ChatState;

  constructor(
    private readonly root: HTMLElement,
    private readonly config: ApiConfig,
    state?: ChatState,
  ) {
    this.state = state ?? initialChatState();
    this.render();
  }

  async submitQuestion(request: QueryRequest): Promise<void> {
    const message: ChatMessage = {
      request,
      response: null,
      consentDenied: false,
      networkError: false,
      errorText: "",
      resolved: null,
    };
    this.state.messages.push(message);
    this.state.busy = true;
    this.render();
    await this.runQuery(message);
  }

  async retry(messageIndex: number): Promise<void> {
    const message = this.state.messages[messageIndex];
    if (!message) return;
    message.networkError = false;
    message.errorText = "";
    this.state.busy = true;
    this.render();
    await this.runQuery(message);
  }

  private async runQuery(message: ChatMessage): Promise<void> {
    try {
      message.response = await postQuery(this.config, message.request);
    } catch (error) {
      if (error instanceof ApiError && error.status === 403) {
        message.consentDenied = true;
        message.errorText = error.message;
      } else if (error instanceof ApiError) {
        message.errorText = `${error.code}: ${error.message}`;
      } else {
        message.networkError = true;
        message.errorText = String(error);
      }
    } finally {
      this.state.busy = false;
      this.render();
    }
  }

  toggleDisclosure(messageIndex: number, marker: number): void {
    const open = this.state.openDisclosure;
    this.state.openDisclosure =
      open && open.message === messageIndex && open.marker === marker
        ? null
        : { message: messageIndex, marker };
    this.render();
  }

  async markResolved(messageIndex: number, resolved: boolean): Promise<void> {
    const message = this.state.messages[messageIndex];
    if (!message || !message.response || message.resolved !== null) return;
    await postFeedback(this.config, message.response.query_id, resolved);
    message.resolved = resolved;
    this.render();
  }

  render(): void {
    this.root.replaceChildren();
    const log = el("div", "chat-log");
    this.state.messages.forEach((message, index) => {
      log.appendChild(this.renderMessage(message, index));
    });
    this.root.appendChild(log);
    this.root.appendChild(this.renderComposer());
  }

  private renderMessage(message: ChatMessage, index: number): HTMLElement {
    const wrap = el("div", "chat-message");
    const question = el("div", "question");
    question.textContent = message.request.question;
    wrap.appendChild(question);

    if (message.consentDenied) {
      const banner = el("div", "consent-banner");
      banner.textContent =
        "Access denied by consent policy. You are not authorized for the requested knowledge.";
      wrap.appendChild(banner);
      return wrap;
    }
    if (message.networkError) {
      const failure = el("div", "network-error");
      failure.textContent = "Request failed. ";
      const retryButton = el("button", "retry") as HTMLButtonElement;
      retryButton.textContent = "Retry";
      retryButton.addEventListener("click", () => void this.retry(index));
      failure.appendChild(retryButton);
      wrap.appendChild(failure);
      return wrap;
    }
    if (message.errorText && !message.response) {
      const failure = el("div", "error");
      failure.textContent = message.errorText;
      wrap.appendChild(failure);
      return wrap;
    }
    if (!message.response) {
      const pending = el("div", "pending");
      pending.textContent = "…";
      wrap.appendChild(pending);
      return wrap;
    }

    const answer = el("div", "answer");
    const text = el("p", "answer-text");
    text.textContent = message.response.answer;
    answer.appendChild(text);

    // citation chips are mandatory whenever citations are non-empty
    const chips = el("div", "citation-chips");
    message.response.citations.forEach((citation, position) => {
      const chip = el("button", "citation-chip") as HTMLButtonElement;
      chip.textContent = `[${citation.marker}]`;
      chip.dataset.artifactId = citation.artifact_id;
      chip.addEventListener("click", () =>
        this.toggleDisclosure(index, citation.marker),
      );
      chips.appendChild(chip);
      const open = this.state.openDisclosure;
      if (open && open.message === index && open.marker === citation.marker) {
        const disclosure = message.response!.disclosure[position];
        if (disclosure) {
          chips.appendChild(renderDisclosure(disclosure));
        }
      }
    });
    answer.appendChild(chips);

    const toggle = el("label", "resolved-toggle");
    const checkbox = el("input") as HTMLInputElement;
    checkbox.type = "checkbox";
    checkbox.checked = message.resolved === true;
    checkbox.disabled = message.resolved !== null;
    checkbox.addEventListener("change", () =>
      void this.markResolved(index, checkbox.checked),
    );
    toggle.appendChild(checkbox);
    toggle.appendChild(document.createTextNode(" resolved, no follow-up needed"));
    answer.appendChild(toggle);

    wrap.appendChild(answer);
    return wrap;
  }

  private renderComposer(): HTMLElement {
    const form = el("form", "composer") as HTMLFormElement;
    const input = el("input", "question-input") as HTMLInputElement;
    input.type = "text";
    input.placeholder = "Ask the knowledge base…";
    const send = el("button", "send") as HTMLButtonElement;
    send.type = "submit";
    send.textContent = "Ask";
    send.disabled = this.state.busy;
    form.appendChild(input);
    form.appendChild(send);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const question = input.value.trim();
      if (question) {
        void this.submitQuestion({ question });
        input.value = "";
      }
    });
    return form;
  }
}

function renderDisclosure(disclosure: {
  confidence: number;
  capture_date: string;
  domain_tag: string;
  doc_id: string;
}): HTMLElement {
  // mandatory disclosure: collapsible, never absent
  const panel = el("dl", "disclosure-panel");
  const rows: Array<[string, string]> = [
    ["confidence", disclosure.confidence.toFixed(2)],
    ["capture_date", disclosure.capture_date],
    ["domain_tag", disclosure.domain_tag],
    ["doc_id", disclosure.doc_id],
  ];
  for (const [key, value] of rows) {
    const dt = el("dt");
    dt.textContent = key;
    const dd = el("dd", `disclosure-${key}`);
    dd.textContent = value;
    panel.appendChild(dt);
    panel.appendChild(dd);
  }
  return panel;
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}
