import { renderDiagram } from "./dot.js";
import type {
  ArtifactEvent,
  FailedEvent,
  SessionEventName,
  StageChanged,
  WaitingForAnswers,
  WaitingForVerdict,
} from "./types.js";

export interface ViewCallbacks {
  onAnswers(answers: string[]): void;
  onFeedback(kind: "accept" | "revise", text?: string): void;
  /** Resolves a content_ref (e.g. the canonical diagram) to its text. */
  fetchRef?(ref: string): Promise<string>;
  fetchSummary?(): Promise<string>;
}

/**
 * Session view: stage badge, transcript, exactly one pending input panel at a
 * time (answers form or verdict panel), and the final summary. Every panel is
 * created by a received server event, never invented client-side.
 */
export class SessionView {
  readonly root: HTMLElement;
  private readonly stageBadge: HTMLElement;
  private readonly transcript: HTMLElement;
  private readonly interaction: HTMLElement;
  private readonly summaryPanel: HTMLElement;

  constructor(
    container: HTMLElement,
    private readonly callbacks: ViewCallbacks,
  ) {
    const doc = container.ownerDocument;
    this.root = container;
    this.stageBadge = doc.createElement("div");
    this.stageBadge.className = "stage-badge";
    this.stageBadge.textContent = "Architectural";
    this.transcript = doc.createElement("ul");
    this.transcript.className = "transcript";
    this.interaction = doc.createElement("div");
    this.interaction.className = "interaction";
    this.summaryPanel = doc.createElement("div");
    this.summaryPanel.className = "summary-panel";
    this.summaryPanel.hidden = true;
    container.append(this.stageBadge, this.transcript, this.interaction, this.summaryPanel);
  }

  private doc(): Document {
    return this.root.ownerDocument;
  }

  private log(text: string): void {
    const item = this.doc().createElement("li");
    item.textContent = text;
    this.transcript.appendChild(item);
  }

  private clearInteraction(): void {
    this.interaction.replaceChildren();
  }

  applyEvent(name: SessionEventName, payload: unknown): void {
    switch (name) {
      case "stage_changed":
        this.stageBadge.textContent = (payload as StageChanged).stage;
        this.log(`stage: ${(payload as StageChanged).stage}`);
        break;
      case "waiting_for_answers":
        this.showAnswersForm((payload as WaitingForAnswers).questions ?? []);
        break;
      case "waiting_for_verdict":
        void this.showVerdictPanel(payload as WaitingForVerdict);
        break;
      case "artifact": {
        const artifact = payload as ArtifactEvent;
        this.log(
          artifact.block
            ? `artifact: ${artifact.kind} for ${artifact.block}`
            : `artifact: ${artifact.kind}`,
        );
        break;
      }
      case "done":
        this.clearInteraction();
        this.log("session complete");
        void this.showSummary();
        break;
      case "failed": {
        this.clearInteraction();
        const banner = this.doc().createElement("div");
        banner.className = "error-banner";
        banner.textContent = `Session failed: ${(payload as FailedEvent).reason}`;
        this.interaction.appendChild(banner);
        break;
      }
    }
  }

  private showAnswersForm(questions: string[]): void {
    this.clearInteraction();
    const doc = this.doc();
    const form = doc.createElement("form");
    form.className = "answers-form";
    const inputs: HTMLInputElement[] = [];
    questions.forEach((question, index) => {
      const field = doc.createElement("label");
      field.className = "answer-field";
      field.textContent = `${index + 1}. ${question}`;
      const input = doc.createElement("input");
      input.type = "text";
      input.name = `answer-${index}`;
      input.placeholder = "leave empty if unknown";
      field.appendChild(input);
      inputs.push(input);
      form.appendChild(field);
    });
    const submit = doc.createElement("button");
    submit.type = "submit";
    submit.textContent = "Send answers";
    form.appendChild(submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      // exactly as many answers as questions; blanks travel as blanks
      this.callbacks.onAnswers(inputs.map((input) => input.value));
      this.clearInteraction();
      this.log(`answers sent (${inputs.length})`);
    });
    this.interaction.appendChild(form);
  }

  private async showVerdictPanel(payload: WaitingForVerdict): Promise<void> {
    this.clearInteraction();
    const doc = this.doc();
    const panel = doc.createElement("div");
    panel.className = "verdict-panel";
    panel.setAttribute("data-kind", payload.kind);

    const content = doc.createElement("div");
    content.className = "verdict-content";
    if (payload.kind === "architecture") {
      let dotText = payload.content ?? "";
      if (payload.content_ref && this.callbacks.fetchRef) {
        try {
          dotText = await this.callbacks.fetchRef(payload.content_ref);
        } catch {
          // fall back to the inline payload
        }
      }
      renderDiagram(content, dotText);
    } else {
      const pre = doc.createElement("pre");
      pre.className = "verdict-text";
      pre.textContent = payload.content ?? "";
      content.appendChild(pre);
    }
    panel.appendChild(content);

    const controls = doc.createElement("div");
    controls.className = "verdict-controls";
    const acceptButton = doc.createElement("button");
    acceptButton.className = "accept-button";
    acceptButton.textContent = "Accept";
    const reviseText = doc.createElement("textarea");
    reviseText.className = "revise-text";
    reviseText.placeholder = "What should change?";
    const reviseButton = doc.createElement("button");
    reviseButton.className = "revise-button";
    reviseButton.textContent = "Revise";

    acceptButton.addEventListener("click", () => {
      this.callbacks.onFeedback("accept");
      this.clearInteraction();
      this.log(`accepted ${payload.kind}`);
    });
    reviseButton.addEventListener("click", () => {
      const text = reviseText.value.trim();
      if (!text) {
        // revise requires nonempty feedback; keep the panel open
        reviseText.classList.add("invalid");
        return;
      }
      this.callbacks.onFeedback("revise", text);
      this.clearInteraction();
      this.log(`revision requested for ${payload.kind}`);
    });
    controls.append(acceptButton, reviseText, reviseButton);
    panel.appendChild(controls);
    this.interaction.appendChild(panel);
  }

  private async showSummary(): Promise<void> {
    if (!this.callbacks.fetchSummary) return;
    try {
      const text = await this.callbacks.fetchSummary();
      this.summaryPanel.hidden = false;
      this.summaryPanel.textContent = text;
    } catch {
      this.summaryPanel.hidden = false;
      this.summaryPanel.textContent = "(summary unavailable)";
    }
  }
}
