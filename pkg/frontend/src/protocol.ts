// Wire protocol robocoach/1 — mirrors docs/protocol.md in the repo root.

export const PROTOCOL = "robocoach/1";

export type Button = "Front" | "Middle" | "Rear";

export interface SessionState {
  phase: string;
  program_index: number;
  activity: string | null;
  set_index: number;
  rep_count: number;
  sets: number | null;
  reps: number | null;
  speed: string;
  cue: string;
  pending_assistance: string | null;
  fault: string | null;
}

export interface HelloMessage {
  kind: "Hello";
  protocol: string;
  seq: number;
}

export interface StateUpdateMessage {
  kind: "StateUpdate";
  at: number;
  state: SessionState;
  assistance_script?: string | null;
  snapshot?: boolean;
  seq: number;
}

export interface CueFrameMessage {
  kind: "CueFrame";
  at: number;
  effect: string;
  front_ring: boolean;
  middle_ring: boolean;
  rear_ring: boolean;
  left_side: boolean;
  right_side: boolean;
  seq: number;
}

export interface UtteranceMessage {
  kind: "Utterance";
  at: number;
  text: string;
  seq: number;
}

export interface PromptMessage {
  kind: "Prompt";
  at: number;
  prompt_type: "speech" | "assistance";
  vocabulary?: string[];
  window_ms?: number | null;
  assistance?: string;
  script?: string;
  seq: number;
}

export interface RepCountMessage {
  kind: "RepCount";
  at: number;
  n: number;
  seq: number;
}

export interface SessionSummaryMessage {
  kind: "SessionSummary";
  at: number;
  duration: string;
  duration_ms: number;
  completed: boolean;
  exercises_programmed: string[];
  exercises_completed: string[];
  disruptions: string[];
  sets_completed: number;
  reps_counted: number;
  help_requests: number;
  seq: number;
}

export interface ErrorMessage {
  kind: "Error";
  error: string;
  seq?: number;
}

export type ServerMessage =
  | HelloMessage
  | StateUpdateMessage
  | CueFrameMessage
  | UtteranceMessage
  | PromptMessage
  | RepCountMessage
  | SessionSummaryMessage
  | ErrorMessage;

const SERVER_KINDS = new Set([
  "Hello",
  "StateUpdate",
  "CueFrame",
  "Utterance",
  "Prompt",
  "RepCount",
  "SessionSummary",
  "Error",
]);

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const kind = (data as { kind?: unknown }).kind;
  if (typeof kind !== "string" || !SERVER_KINDS.has(kind)) return null;
  return data as ServerMessage;
}

export type ConsoleKind =
  | "Hello"
  | "ButtonDown"
  | "ButtonUp"
  | "SpeechText"
  | "AssistanceDone"
  | "TherapistAbort"
  | "EngineerReset";
