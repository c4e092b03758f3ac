export type WaitingKind = "none" | "answers" | "verdict";

export interface SessionSummary {
  stage: string;
  waiting: WaitingKind;
  questions?: string[] | null;
  artifact_kind?: string | null;
  content_ref?: string | null;
  failed: boolean;
  failure_reason?: string | null;
}

export interface WaitingForAnswers {
  questions: string[];
}

export interface WaitingForVerdict {
  kind: string;
  content_ref?: string | null;
  content?: string | null;
}

export interface ArtifactEvent {
  kind: string;
  path?: string;
  block?: string;
  content?: string;
}

export interface StageChanged {
  stage: string;
}

export interface FailedEvent {
  reason: string;
}

export type SessionEventName =
  | "stage_changed"
  | "waiting_for_answers"
  | "waiting_for_verdict"
  | "artifact"
  | "done"
  | "failed";

export type SessionEventHandler = (name: SessionEventName, payload: unknown) => void;
