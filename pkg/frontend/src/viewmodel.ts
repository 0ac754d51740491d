// Console view model: a pure fold over the received message sequence.
// Replaying the same transcript always produces the same final model,
// and nothing here touches the DOM or the socket.

import type { ServerMessage, SessionState, SessionSummaryMessage } from "./protocol.js";

export interface LedState {
  effect: string;
  frontRing: boolean;
  middleRing: boolean;
  rearRing: boolean;
  leftSide: boolean;
  rightSide: boolean;
  at: number;
}

export interface TranscriptEntry {
  at: number;
  kind: "utterance" | "prompt" | "error";
  text: string;
}

export interface SpeechPromptView {
  vocabulary: string[];
  windowMs: number | null;
  at: number;
}

export interface ViewModel {
  protocolConfirmed: boolean;
  state: SessionState | null;
  assistanceScript: string | null;
  cue: LedState;
  transcript: TranscriptEntry[];
  speechPrompt: SpeechPromptView | null;
  repCount: number;
  summary: SessionSummaryMessage | null;
  errors: string[];
  messagesSeen: number;
}

export function initialViewModel(): ViewModel {
  return {
    protocolConfirmed: false,
    state: null,
    assistanceScript: null,
    cue: {
      effect: "AllOff",
      frontRing: false,
      middleRing: false,
      rearRing: false,
      leftSide: false,
      rightSide: false,
      at: 0,
    },
    transcript: [],
    speechPrompt: null,
    repCount: 0,
    summary: null,
    errors: [],
    messagesSeen: 0,
  };
}

export function applyMessage(vm: ViewModel, msg: ServerMessage): ViewModel {
  const next: ViewModel = { ...vm, messagesSeen: vm.messagesSeen + 1 };
  switch (msg.kind) {
    case "Hello":
      next.protocolConfirmed = true;
      break;
    case "StateUpdate":
      next.state = msg.state;
      next.assistanceScript =
        msg.state.pending_assistance != null ? msg.assistance_script ?? vm.assistanceScript : null;
      // a prompt is over once nothing is awaited
      if (msg.state.pending_assistance == null && vm.speechPrompt !== null) {
        next.speechPrompt = vm.speechPrompt;
      }
      break;
    case "CueFrame":
      next.cue = {
        effect: msg.effect,
        frontRing: msg.front_ring,
        middleRing: msg.middle_ring,
        rearRing: msg.rear_ring,
        leftSide: msg.left_side,
        rightSide: msg.right_side,
        at: msg.at,
      };
      break;
    case "Utterance":
      next.transcript = [...vm.transcript, { at: msg.at, kind: "utterance", text: msg.text }];
      break;
    case "Prompt":
      if (msg.prompt_type === "speech") {
        next.speechPrompt = {
          vocabulary: msg.vocabulary ?? [],
          windowMs: msg.window_ms ?? null,
          at: msg.at,
        };
        next.transcript = [
          ...vm.transcript,
          { at: msg.at, kind: "prompt", text: `listening for: ${(msg.vocabulary ?? []).join(", ")}` },
        ];
      } else {
        next.assistanceScript = msg.script ?? null;
        next.transcript = [
          ...vm.transcript,
          { at: msg.at, kind: "prompt", text: `assistance needed (${msg.assistance}): ${msg.script ?? ""}` },
        ];
      }
      break;
    case "RepCount":
      next.repCount = msg.n;
      break;
    case "SessionSummary":
      next.summary = msg;
      break;
    case "Error":
      next.errors = [...vm.errors, msg.error];
      next.transcript = [...vm.transcript, { at: 0, kind: "error", text: msg.error }];
      break;
  }
  return next;
}

export function foldTranscript(messages: ServerMessage[]): ViewModel {
  return messages.reduce(applyMessage, initialViewModel());
}
