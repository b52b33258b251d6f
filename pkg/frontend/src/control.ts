/**
 * Lifecycle control panel model: which buttons are live in which state,
 * mirroring the server's transition table so the UI never offers a verb
 * the server would reject.
 */

import {
  Control,
  V_PAUSE,
  V_RESTART,
  V_RESUME,
  V_START,
  V_STEP,
  V_STOP,
} from "./protocol.js";
import type { Lifecycle } from "./state.js";

export type ButtonName = "start" | "pause" | "resume" | "stop" | "restart" | "step";

export const BUTTON_VERBS: Record<ButtonName, number> = {
  start: V_START,
  pause: V_PAUSE,
  resume: V_RESUME,
  stop: V_STOP,
  restart: V_RESTART,
  step: V_STEP,
};

const LEGAL: Record<ButtonName, Lifecycle[]> = {
  start: ["idle"],
  pause: ["running"],
  resume: ["paused"],
  stop: ["running", "paused"],
  restart: ["idle", "running", "paused", "finished"],
  step: ["idle", "paused"],
};

export function buttonEnabled(button: ButtonName, state: Lifecycle): boolean {
  return LEGAL[button].includes(state);
}

export function enabledButtons(state: Lifecycle): Record<ButtonName, boolean> {
  const out = {} as Record<ButtonName, boolean>;
  for (const name of Object.keys(BUTTON_VERBS) as ButtonName[]) {
    out[name] = buttonEnabled(name, state);
  }
  return out;
}

/** Control message for a button press, or null when the press is illegal. */
export function pressButton(button: ButtonName, state: Lifecycle): Control | null {
  if (!buttonEnabled(button, state)) return null;
  return { kind: "control", verb: BUTTON_VERBS[button] };
}
