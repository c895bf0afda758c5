import { encodeCommand } from "./protocol.js";
import { drawScene } from "./render.js";
import { ReconnectingSocket } from "./socket.js";
import {
  ViewState,
  controlsEnabled,
  initialState,
  onCommandSent,
  onConnection,
  onTelemetryLine,
  onTick,
} from "./store.js";
import { canvasToWorld, fitViewport, Viewport } from "./transform.js";
import { OperatorCommand } from "./types.js";

const params = new URLSearchParams(location.search);
const gatewayUrl = params.get("gateway") ?? "ws://127.0.0.1:8080/ws";

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

let state: ViewState = initialState();
let view: Viewport | null = null;

const el = (id: string) => document.getElementById(id)!;
const buttons: Record<string, HTMLButtonElement> = {
  ESTOP: el("btn-estop") as HTMLButtonElement,
  RESUME: el("btn-resume") as HTMLButtonElement,
  LOCK: el("btn-lock") as HTMLButtonElement,
  UNLOCK: el("btn-unlock") as HTMLButtonElement,
};

const socket = new ReconnectingSocket(gatewayUrl, {
  onLine: (line) => {
    state = onTelemetryLine(state, line, Date.now());
    refresh();
  },
  onStatus: (status) => {
    state = onConnection(state, status);
    refresh();
  },
});

function sendCommand(cmd: OperatorCommand): void {
  if (!controlsEnabled(state)) {
    state = { ...state, pendingWarning: "not connected; command not sent" };
    refresh();
    return;
  }
  if (socket.send(encodeCommand(cmd))) {
    state = onCommandSent(state, cmd, Date.now());
  }
  refresh();
}

for (const [kind, btn] of Object.entries(buttons)) {
  btn.onclick = () => sendCommand({ cmd: kind as OperatorCommand["cmd"] });
}

canvas.onclick = (ev) => {
  if (!view) return;
  const rect = canvas.getBoundingClientRect();
  const [x, y] = canvasToWorld(view, ev.clientX - rect.left, ev.clientY - rect.top);
  sendCommand({ cmd: "GOAL", x: Math.round(x * 1000) / 1000, y: Math.round(y * 1000) / 1000 });
};

function refresh(): void {
  const rec = state.latest;
  if (state.map && !view) {
    const m = state.map;
    view = fitViewport(
      [
        m.origin[0],
        m.origin[1],
        m.origin[0] + m.width * m.resolution,
        m.origin[1] + m.height * m.resolution,
      ],
      canvas.width,
      canvas.height,
    );
  }
  if (view) drawScene(ctx, view, state.map, state.path, rec);

  el("conn").textContent = state.connection;
  el("conn").className = `badge conn-${state.connection.toLowerCase()}`;
  const live = controlsEnabled(state);
  for (const btn of Object.values(buttons)) btn.disabled = !live;

  if (rec) {
    el("mode").textContent = rec.mode;
    el("mode").className = `badge mode-${rec.mode.toLowerCase()}`;
    el("lock").textContent = rec.lock;
    el("sim-time").textContent = rec.t.toFixed(1) + " s";
    el("speed").textContent = rec.twist.v.toFixed(2) + " m/s";
    el("pwm").textContent = `${rec.pwm[0].toFixed(2)} / ${rec.pwm[1].toFixed(2)}`;
    el("pose").textContent =
      `(${rec.pose_est.x.toFixed(2)}, ${rec.pose_est.y.toFixed(2)}, ${rec.pose_est.theta.toFixed(2)})`;
    el("goals").textContent = String(rec.goals_reached);
    el("planner").textContent = rec.planner
      ? rec.planner.safe_stop
        ? "SAFE STOP"
        : `min ${rec.planner.min_cost.toFixed(1)} ess ${rec.planner.ess.toFixed(0)}`
      : "-";
    const volts = rec.battery_mv / 1000;
    el("battery-label").textContent = volts.toFixed(2) + " V";
    const frac = Math.max(0, Math.min(1, (volts - 6.0) / (8.4 - 6.0)));
    (el("battery-fill") as HTMLElement).style.width = `${(frac * 100).toFixed(0)}%`;
  }
  el("errors").textContent = String(state.malformedLines);
  el("warning").textContent = state.pendingWarning ?? "";
  el("pending").textContent = state.pending ? state.pending.command.cmd + "..." : "";
  (el("version-banner") as HTMLElement).style.display = state.versionBanner ? "block" : "none";
}

setInterval(() => {
  state = onTick(state, Date.now());
  refresh();
}, 500);

socket.connect();
refresh();
