// Parsing and encoding against the gateway schema. Malformed input is
// reported, never thrown past the caller.

import { OperatorCommand, SCHEMA_VERSION, TelemetryRecord } from "./types.js";

export interface ParseResult {
  record: TelemetryRecord | null;
  versionMismatch: boolean;
  error: string | null;
}

export function parseTelemetry(line: string): ParseResult {
  let data: unknown;
  try {
    data = JSON.parse(line);
  } catch (e) {
    return { record: null, versionMismatch: false, error: `bad JSON: ${e}` };
  }
  if (typeof data !== "object" || data === null) {
    return { record: null, versionMismatch: false, error: "not an object" };
  }
  const rec = data as Partial<TelemetryRecord>;
  if (
    typeof rec.t !== "number" ||
    typeof rec.mode !== "string" ||
    typeof rec.lock !== "string" ||
    typeof rec.pose_est !== "object" ||
    typeof rec.pose_true !== "object"
  ) {
    return { record: null, versionMismatch: false, error: "missing required fields" };
  }
  // Version mismatch still renders best-effort, but the caller shows a banner.
  const mismatch = rec.v !== SCHEMA_VERSION;
  return { record: rec as TelemetryRecord, versionMismatch: mismatch, error: null };
}

export function encodeCommand(cmd: OperatorCommand): string {
  if (cmd.cmd === "GOAL") {
    if (
      typeof cmd.x !== "number" ||
      typeof cmd.y !== "number" ||
      !isFinite(cmd.x) ||
      !isFinite(cmd.y)
    ) {
      throw new Error("GOAL requires finite x and y");
    }
    return JSON.stringify({ cmd: "GOAL", x: cmd.x, y: cmd.y });
  }
  return JSON.stringify({ cmd: cmd.cmd });
}

export function decodeRle(snapshot: {
  width: number;
  height: number;
  rle: Array<[number, number]>;
}): Uint8Array {
  // cells flatten x-major: index = ix * height + iy
  const cells = new Uint8Array(snapshot.width * snapshot.height);
  let pos = 0;
  for (const [code, run] of snapshot.rle) {
    cells.fill(code, pos, pos + run);
    pos += run;
  }
  return cells;
}
