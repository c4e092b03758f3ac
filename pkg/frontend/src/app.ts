import { ApiClient } from "./api.js";
import { SessionView } from "./view.js";
import type { SessionSummary } from "./types.js";

/**
 * Page bootstrap: a create-session form, then a live SessionView connected to
 * the event stream of the created (or entered) session id.
 */
export function connect(container: HTMLElement, api: ApiClient, sessionId: string): SessionView {
  const view = new SessionView(container, {
    onAnswers: (answers) => void api.postAnswers(sessionId, answers),
    onFeedback: (kind, text) => void api.postFeedback(sessionId, kind, text ?? ""),
    fetchRef: (ref) => api.fetchText(ref),
    fetchSummary: () => api.fetchSummary(sessionId),
  });
  const resync = async (): Promise<void> => {
    let state: SessionSummary;
    try {
      state = await api.getState(sessionId);
    } catch {
      return;
    }
    // realign the pending panel with the server's waiting state
    if (state.waiting === "answers" && state.questions) {
      view.applyEvent("waiting_for_answers", { questions: state.questions });
    } else if (state.waiting === "verdict" && state.artifact_kind) {
      view.applyEvent("waiting_for_verdict", {
        kind: state.artifact_kind,
        content_ref: state.content_ref,
        content: state.content_ref ? undefined : "",
      });
    }
  };
  api.openEvents(sessionId, (name, payload) => view.applyEvent(name, payload), resync);
  return view;
}

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const api = new ApiClient("");

  const form = document.createElement("form");
  form.id = "create-session";
  const description = document.createElement("textarea");
  description.placeholder = "Describe the data acquisition project to design...";
  description.rows = 4;
  const start = document.createElement("button");
  start.type = "submit";
  start.textContent = "Start design session";
  form.append(description, start);
  root.appendChild(form);

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    if (!description.value.trim()) return;
    const sessionId = await api.createSession(description.value);
    form.remove();
    const container = document.createElement("div");
    container.id = "session";
    root.appendChild(container);
    connect(container, api, sessionId);
  });
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  bootstrap();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", bootstrap);
}
