import { expect, it } from "vitest";
import {
  V_PAUSE,
  V_RESTART,
  V_RESUME,
  V_START,
  V_STEP,
  V_STOP,
} from "../src/protocol.js";
import {
  BUTTON_VERBS,
  ButtonName,
  buttonEnabled,
  enabledButtons,
  pressButton,
} from "../src/control.js";
import type { Lifecycle } from "../src/state.js";

it("button verbs match the wire constants", () => {
  expect(BUTTON_VERBS).toEqual({
    start: V_START,
    pause: V_PAUSE,
    resume: V_RESUME,
    stop: V_STOP,
    restart: V_RESTART,
    step: V_STEP,
  });
});

const CASES: Array<[Lifecycle, ButtonName[]]> = [
  ["idle", ["start", "restart", "step"]],
  ["running", ["pause", "stop", "restart"]],
  ["paused", ["resume", "stop", "restart", "step"]],
  ["finished", ["restart"]],
];

for (const [state, allowed] of CASES) {
  it(`${state} enables exactly ${allowed.join(", ")}`, () => {
    const flags = enabledButtons(state);
    for (const name of Object.keys(BUTTON_VERBS) as ButtonName[]) {
      expect(flags[name], `${name} in ${state}`).toBe(allowed.includes(name));
      expect(buttonEnabled(name, state)).toBe(allowed.includes(name));
    }
  });
}

it("pressing a legal button yields its control message", () => {
  expect(pressButton("start", "idle")).toEqual({ kind: "control", verb: V_START });
  expect(pressButton("restart", "finished")).toEqual({
    kind: "control",
    verb: V_RESTART,
  });
});

it("pressing an illegal button yields nothing", () => {
  expect(pressButton("pause", "idle")).toBeNull();
  expect(pressButton("resume", "running")).toBeNull();
  expect(pressButton("start", "finished")).toBeNull();
});
