// DOM wiring for the operator console. All session state flows from the
// server: every widget renders the view model, and user actions only send
// messages (the fold in viewmodel.ts is the single source of local truth).

import { GatewayClient, type ConnectionStatus } from "./client.js";
import type { Button, ServerMessage } from "./protocol.js";
import { applyMessage, initialViewModel, type ViewModel } from "./viewmodel.js";

let vm: ViewModel = initialViewModel();
let status: ConnectionStatus = "connecting";
let notices: string[] = [];

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

const wsUrl = (() => {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws`;
})();

const client = new GatewayClient(
  wsUrl,
  {
    onMessage(msg: ServerMessage) {
      vm = applyMessage(vm, msg);
      render();
    },
    onStatus(s) {
      status = s;
      render();
    },
    onNotice(text) {
      notices = [...notices.slice(-4), text];
      render();
    },
  },
  (url) => new WebSocket(url),
);

function render(): void {
  const banner = $("connection");
  banner.textContent =
    status === "open" ? "connected" : status === "connecting" ? "connecting…" : "disconnected — reconnecting";
  banner.className = `banner ${status}`;
  document.querySelectorAll("button, input").forEach((el) => {
    (el as HTMLButtonElement).disabled = status !== "open";
  });
  ($("role") as HTMLSelectElement).disabled = false;

  const state = vm.state;
  $("phase").textContent = state ? state.phase : "—";
  $("activity").textContent = state?.activity ?? "—";
  $("set").textContent = state && state.sets ? `${state.set_index}/${state.sets}` : "—";
  $("speed").textContent = state?.speed ?? "—";
  $("rep").textContent = String(vm.repCount || "—");
  $("fault").textContent = state?.fault ?? "";
  $("fault").style.display = state?.fault ? "block" : "none";

  // LED widget mirrors the cue frames
  setLed("led-front", vm.cue.frontRing);
  setLed("led-middle", vm.cue.middleRing);
  setLed("led-rear", vm.cue.rearRing);
  setLed("led-left", vm.cue.leftSide);
  setLed("led-right", vm.cue.rightSide);
  $("cue-name").textContent = vm.cue.effect;

  const assistance = $("assistance");
  if (state?.pending_assistance) {
    assistance.style.display = "block";
    $("assistance-kind").textContent = state.pending_assistance;
    $("assistance-script").textContent = vm.assistanceScript ?? "";
  } else {
    assistance.style.display = "none";
  }

  const listening = $("listening");
  listening.style.display = vm.cue.leftSide || vm.cue.rightSide ? "inline" : "none";

  const transcript = $("transcript");
  transcript.innerHTML = "";
  for (const entry of vm.transcript.slice(-200)) {
    const line = document.createElement("div");
    line.className = `line ${entry.kind}`;
    line.textContent = `[${mmss(entry.at)}] ${entry.text}`;
    transcript.appendChild(line);
  }
  transcript.scrollTop = transcript.scrollHeight;

  const noticeBox = $("notices");
  noticeBox.textContent = notices.join(" · ");

  const summary = $("summary");
  if (vm.summary) {
    summary.style.display = "block";
    summary.textContent =
      `session ${vm.summary.completed ? "completed" : "not completed"} in ${vm.summary.duration}; ` +
      `${vm.summary.reps_counted} reps, ${vm.summary.help_requests} help requests`;
  } else {
    summary.style.display = "none";
  }

  $("reset").style.display = ($("role") as HTMLSelectElement).value === "engineer" ? "inline-block" : "none";
}

function setLed(id: string, on: boolean): void {
  $(id).classList.toggle("on", on);
}

function mmss(at: number): string {
  const seconds = Math.floor(at / 1000);
  return `${String(Math.floor(seconds / 60)).padStart(2, "0")}:${String(seconds % 60).padStart(2, "0")}`;
}

// -- head-button widgets: press-and-hold via pointer events; chords come from
// multi-touch or from holding one widget while clicking another, and the
// keyboard mirrors them (F/M/R keys) for single-pointer machines.

const BUTTONS: [string, Button][] = [
  ["btn-front", "Front"],
  ["btn-middle", "Middle"],
  ["btn-rear", "Rear"],
];

const held = new Set<Button>();

for (const [id, button] of BUTTONS) {
  const el = $(id);
  el.addEventListener("pointerdown", (ev) => {
    ev.preventDefault();
    if (!held.has(button)) {
      held.add(button);
      client.button(button, true);
    }
  });
  const release = () => {
    if (held.has(button)) {
      held.delete(button);
      client.button(button, false);
    }
  };
  el.addEventListener("pointerup", release);
  el.addEventListener("pointercancel", release);
  el.addEventListener("pointerleave", release);
}

const KEYMAP: Record<string, Button> = { f: "Front", m: "Middle", r: "Rear" };

document.addEventListener("keydown", (ev) => {
  const button = KEYMAP[ev.key.toLowerCase()];
  if (button && !ev.repeat && document.activeElement?.id !== "speech-input" && !held.has(button)) {
    held.add(button);
    client.button(button, true);
  }
});

document.addEventListener("keyup", (ev) => {
  const button = KEYMAP[ev.key.toLowerCase()];
  if (button && held.has(button)) {
    held.delete(button);
    client.button(button, false);
  }
});

// -- speech, assistance, session controls

$("speech-send").addEventListener("click", sendSpeech);
$("speech-input").addEventListener("keydown", (ev) => {
  if ((ev as KeyboardEvent).key === "Enter") sendSpeech();
});

function sendSpeech(): void {
  const input = $("speech-input") as HTMLInputElement;
  const text = input.value.trim();
  if (text) {
    client.speech(text);
    input.value = "";
  }
}

$("assistance-done").addEventListener("click", () => client.assistanceDone());
$("abort").addEventListener("click", () => {
  if (confirm("Abort this session?")) client.abort();
});
$("reset").addEventListener("click", () => client.engineerReset());
($("role") as HTMLSelectElement).addEventListener("change", (ev) => {
  client.role = (ev.target as HTMLSelectElement).value as typeof client.role;
  render();
});

setInterval(() => client.pruneQueue(), 1_000);
client.connect();
render();
