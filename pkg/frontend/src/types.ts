// Gateway telemetry schema (v1); see docs/telemetry.md in the main repo.

export const SCHEMA_VERSION = 1;

export interface PoseJson {
  x: number;
  y: number;
  theta: number;
}

export interface GridSnapshot {
  origin: [number, number];
  resolution: number;
  width: number;
  height: number;
  rle: Array<[number, number]>; // [code, run]; 0 unknown, 1 free, 2 occupied
}

export interface DetectionJson {
  cls: string;
  center: [number, number];
  footprint: [number, number];
  confidence: number;
}

export interface PlannerJson {
  min_cost: number;
  mean_cost: number;
  ess: number;
  safe_stop: boolean;
}

export interface TelemetryRecord {
  v: number;
  t: number;
  mode: string;
  lock: string;
  battery_mv: number;
  pose_est: PoseJson;
  pose_true: PoseJson;
  twist: { v: number; omega: number };
  setpoints: [number, number];
  pwm: [number, number];
  goal: [number, number] | null;
  goals_reached: number;
  planner: PlannerJson | null;
  detections: DetectionJson[];
  path: Array<[number, number]> | null; // null = unchanged, [] = none
  map: GridSnapshot | null;
}

export type CommandKind = "ESTOP" | "RESUME" | "GOAL" | "LOCK" | "UNLOCK";

export interface OperatorCommand {
  cmd: CommandKind;
  x?: number;
  y?: number;
}

export type Connection = "Connecting" | "Live" | "Lost";
