import { describe, expect, it } from "vitest";

import { decodeRle, encodeCommand, parseTelemetry } from "../src/protocol.js";

const VALID = JSON.stringify({
  v: 1,
  t: 1.5,
  mode: "Operational",
  lock: "Locked",
  battery_mv: 8300,
  pose_est: { x: 1, y: 2, theta: 0.1 },
  pose_true: { x: 1.1, y: 2.1, theta: 0.12 },
  twist: { v: 0.8, omega: 0.0 },
  setpoints: [9.0, 9.0],
  pwm: [0.4, 0.4],
  goal: [5, 5],
  goals_reached: 0,
  planner: null,
  detections: [],
  path: null,
  map: null,
});

describe("parseTelemetry", () => {
  it("accepts a valid v1 record", () => {
    const r = parseTelemetry(VALID);
    expect(r.error).toBeNull();
    expect(r.versionMismatch).toBe(false);
    expect(r.record?.mode).toBe("Operational");
  });

  it("rejects malformed json without throwing", () => {
    const r = parseTelemetry("{nope");
    expect(r.record).toBeNull();
    expect(r.error).toContain("bad JSON");
  });

  it("rejects records missing required fields", () => {
    const r = parseTelemetry('{"v":1,"t":0.5}');
    expect(r.record).toBeNull();
    expect(r.error).toContain("missing");
  });

  it("flags version mismatches but still yields the record", () => {
    const other = JSON.parse(VALID);
    other.v = 2;
    const r = parseTelemetry(JSON.stringify(other));
    expect(r.versionMismatch).toBe(true);
    expect(r.record?.t).toBe(1.5);
  });
});

describe("encodeCommand", () => {
  it("emits the exact gateway lines", () => {
    expect(encodeCommand({ cmd: "ESTOP" })).toBe('{"cmd":"ESTOP"}');
    expect(encodeCommand({ cmd: "GOAL", x: 3.0, y: 1.5 })).toBe('{"cmd":"GOAL","x":3,"y":1.5}');
    expect(encodeCommand({ cmd: "UNLOCK" })).toBe('{"cmd":"UNLOCK"}');
  });

  it("refuses non-finite goal coordinates", () => {
    expect(() => encodeCommand({ cmd: "GOAL", x: NaN, y: 1 })).toThrow();
    expect(() => encodeCommand({ cmd: "GOAL" })).toThrow();
  });
});

describe("decodeRle", () => {
  it("expands runs x-major", () => {
    const cells = decodeRle({ width: 2, height: 3, rle: [[0, 2], [2, 1], [1, 3]] });
    expect(Array.from(cells)).toEqual([0, 0, 2, 1, 1, 1]);
    // cell (ix=1, iy=0) is index 1*3+0
    expect(cells[3]).toBe(1);
  });
});
