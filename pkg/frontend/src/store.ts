/**
 * Single client-side state store. Every server message funnels through
 * `reduce`; the DOM layer only reads the resulting state.
 */

import { TaskConfig } from "./config.js";

export const MAX_POINTS = 5000; // chart history cap

export interface RoundPoint {
  round: number;
  testAccuracy: number;
  testLoss: number;
  bytesUp: number;
  bytesDown: number;
}

export interface WireMessage {
  type: string;
  taskId?: string;
  round?: number | null;
  body?: Record<string, unknown>;
}

export interface ResolvedIntent {
  config: Record<string, unknown>;
  mode: string; // "remote" | "fallback"
}

export interface State {
  connection: "connecting" | "open" | "closed";
  taskId: string | null;
  status: "idle" | "running" | "complete" | "failed";
  points: RoundPoint[];
  totalBytesUp: number;
  totalBytesDown: number;
  finalAccuracy: number | null;
  error: string | null;
  resolvedIntent: ResolvedIntent | null;
  warnings: string[];
}

export function initialState(): State {
  return {
    connection: "connecting",
    taskId: null,
    status: "idle",
    points: [],
    totalBytesUp: 0,
    totalBytesDown: 0,
    finalAccuracy: null,
    error: null,
    resolvedIntent: null,
    warnings: [],
  };
}

function warn(state: State, message: string): void {
  state.warnings.push(message);
  if (typeof console !== "undefined") console.warn(message);
}

/** Apply one server message; mutates and returns the state. */
export function reduce(state: State, msg: WireMessage): State {
  switch (msg.type) {
    case "TaskAccepted": {
      state.taskId = msg.taskId ?? null;
      state.status = "running";
      state.points = [];
      state.totalBytesUp = 0;
      state.totalBytesDown = 0;
      state.finalAccuracy = null;
      state.error = null;
      break;
    }
    case "RoundResult": {
      if (state.taskId !== null && msg.taskId && msg.taskId !== state.taskId) break;
      const body = msg.body ?? {};
      const round = Number(body.round ?? msg.round ?? NaN);
      if (!Number.isFinite(round)) {
        warn(state, "RoundResult without a round number ignored");
        break;
      }
      const last = state.points.length > 0 ? state.points[state.points.length - 1].round : 0;
      if (round <= last) {
        warn(state, `duplicate or out-of-order round ${round} ignored`);
        break;
      }
      state.points.push({
        round,
        testAccuracy: Number(body.testAccuracy ?? 0),
        testLoss: Number(body.testLoss ?? 0),
        bytesUp: Number(body.bytesUp ?? 0),
        bytesDown: Number(body.bytesDown ?? 0),
      });
      if (state.points.length > MAX_POINTS) {
        state.points.splice(0, state.points.length - MAX_POINTS);
      }
      state.totalBytesUp += Number(body.bytesUp ?? 0);
      state.totalBytesDown += Number(body.bytesDown ?? 0);
      break;
    }
    case "TaskComplete": {
      if (state.taskId !== null && msg.taskId && msg.taskId !== state.taskId) break;
      state.status = "complete";
      state.finalAccuracy = Number(msg.body?.finalAccuracy ?? NaN);
      break;
    }
    case "Error": {
      if (state.taskId !== null && msg.taskId && msg.taskId !== state.taskId) break;
      const body = msg.body ?? {};
      state.error = `${body.error ?? "Error"}: ${body.detail ?? ""}`.trim();
      if (state.status === "running") state.status = "failed";
      break;
    }
    case "IntentResolved": {
      state.resolvedIntent = {
        config: (msg.body?.config as Record<string, unknown>) ?? {},
        mode: String(msg.body?.mode ?? "remote"),
      };
      break;
    }
    default:
      warn(state, `unhandled message type ${msg.type}`);
  }
  return state;
}

/** Cumulative client->server bytes per stored point (monotone by construction). */
export function cumulativeBytesUp(state: State): number[] {
  const out: number[] = [];
  let total = 0;
  for (const p of state.points) {
    total += p.bytesUp;
    out.push(total);
  }
  return out;
}
