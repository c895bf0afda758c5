// Single state store: socket events and user actions funnel through
// these pure update functions, so the view never originates state.

import { parseTelemetry } from "./protocol.js";
import {
  Connection,
  GridSnapshot,
  OperatorCommand,
  TelemetryRecord,
} from "./types.js";

export const PENDING_TIMEOUT_MS = 3000;

export interface PendingCommand {
  command: OperatorCommand;
  sentAt: number; // ms epoch
}

export interface ViewState {
  connection: Connection;
  latest: TelemetryRecord | null;
  map: GridSnapshot | null;
  path: Array<[number, number]>;
  pending: PendingCommand | null;
  pendingWarning: string | null;
  malformedLines: number;
  versionBanner: boolean;
}

export function initialState(): ViewState {
  return {
    connection: "Connecting",
    latest: null,
    map: null,
    path: [],
    pending: null,
    pendingWarning: null,
    malformedLines: 0,
    versionBanner: false,
  };
}

export function controlsEnabled(s: ViewState): boolean {
  return s.connection === "Live";
}

/** True when a telemetry record shows the command took effect. */
export function commandReflected(cmd: OperatorCommand, rec: TelemetryRecord): boolean {
  switch (cmd.cmd) {
    case "ESTOP":
      return rec.mode === "Estopped";
    case "RESUME":
      return rec.mode !== "Estopped" && rec.mode !== "BatteryFault";
    case "LOCK":
      return rec.lock === "Locked";
    case "UNLOCK":
      return rec.lock === "Unlocked";
    case "GOAL":
      return (
        rec.goal !== null &&
        Math.abs(rec.goal[0] - (cmd.x ?? NaN)) < 1e-6 &&
        Math.abs(rec.goal[1] - (cmd.y ?? NaN)) < 1e-6
      );
  }
}

export function onTelemetryLine(s: ViewState, line: string, now: number): ViewState {
  const { record, versionMismatch, error } = parseTelemetry(line);
  if (error !== null || record === null) {
    return { ...s, malformedLines: s.malformedLines + 1 };
  }
  let pending = s.pending;
  let warning = s.pendingWarning;
  if (pending && commandReflected(pending.command, record)) {
    pending = null;
    warning = null;
  } else if (pending && now - pending.sentAt > PENDING_TIMEOUT_MS) {
    warning = `${pending.command.cmd} not reflected within ${PENDING_TIMEOUT_MS / 1000}s`;
    pending = null;
  }
  return {
    ...s,
    latest: record,
    map: record.map ?? s.map,
    path: record.path === null ? s.path : record.path,
    pending,
    pendingWarning: warning,
    versionBanner: s.versionBanner || versionMismatch,
  };
}

export function onCommandSent(s: ViewState, command: OperatorCommand, now: number): ViewState {
  return { ...s, pending: { command, sentAt: now }, pendingWarning: null };
}

export function onConnection(s: ViewState, connection: Connection): ViewState {
  const next: ViewState = { ...s, connection };
  if (connection !== "Live") {
    next.pending = null;
  }
  return next;
}

/** Periodic check so a silent stream still times pending commands out. */
export function onTick(s: ViewState, now: number): ViewState {
  if (s.pending && now - s.pending.sentAt > PENDING_TIMEOUT_MS) {
    return {
      ...s,
      pending: null,
      pendingWarning: `${s.pending.command.cmd} not reflected within ${PENDING_TIMEOUT_MS / 1000}s`,
    };
  }
  return s;
}
