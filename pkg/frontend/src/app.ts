// Two-screen shell: Chat and Validation. The session token lives in memory
// only; every server interaction goes through the REST endpoints.

import { ChatView } from "./chat.js";
import { QueueView } from "./queue.js";
import type { ApiConfig } from "./api.js";

export interface AppOptions {
  baseUrl: string;
  token: string;
  expertId?: string;
}

export function mountApp(root: HTMLElement, options: AppOptions): void {
  const config: ApiConfig = { baseUrl: options.baseUrl, token: options.token };
  root.replaceChildren();

  const nav = document.createElement("nav");
  const chatTab = document.createElement("button");
  chatTab.textContent = "Chat";
  chatTab.className = "tab-chat";
  const queueTab = document.createElement("button");
  queueTab.textContent = "Validation";
  queueTab.className = "tab-queue";
  nav.appendChild(chatTab);
  nav.appendChild(queueTab);
  root.appendChild(nav);

  const chatRoot = document.createElement("section");
  chatRoot.className = "screen-chat";
  const queueRoot = document.createElement("section");
  queueRoot.className = "screen-queue";
  queueRoot.style.display = "none";
  root.appendChild(chatRoot);
  root.appendChild(queueRoot);

  new ChatView(chatRoot, config);
  let queue: QueueView | null = null;

  chatTab.addEventListener("click", () => {
    chatRoot.style.display = "";
    queueRoot.style.display = "none";
  });
  queueTab.addEventListener("click", () => {
    chatRoot.style.display = "none";
    queueRoot.style.display = "";
    if (!queue && options.expertId) {
      queue = new QueueView(queueRoot, config, options.expertId);
      void queue.refresh();
    }
  });
}
