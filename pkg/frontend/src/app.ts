/**
 * DOM wiring: task form, intent box with confirmation, live SVG charts.
 * All state lives in the store; this module only renders and forwards events.
 */

import { TaskConfig, canonicalJson, defaultKeys } from "./config.js";
import {
  FormModel,
  compressParamVisible,
  defaultForm,
  formPayload,
  toConfig,
  validateForm,
} from "./form.js";
import { State, WireMessage, cumulativeBytesUp, initialState, reduce } from "./store.js";

const state: State = initialState();
let form: FormModel = defaultForm();
let socket: WebSocket | null = null;

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${location.host}/ui`;
}

function connect(): void {
  state.connection = "connecting";
  render();
  const ws = new WebSocket(wsUrl());
  socket = ws;
  ws.onopen = () => {
    state.connection = "open";
    render();
  };
  ws.onmessage = (ev) => {
    try {
      const msg = JSON.parse(ev.data) as WireMessage;
      reduce(state, msg);
    } catch (e) {
      console.warn("bad frame", e);
    }
    render();
  };
  ws.onclose = () => {
    state.connection = "closed";
    render();
    setTimeout(connect, 1000); // reconnect banner stays up meanwhile
  };
}

function send(msg: WireMessage): void {
  if (socket && socket.readyState === WebSocket.OPEN) {
    socket.send(JSON.stringify(msg));
  }
}

function submitConfig(config: Record<string, unknown>): void {
  send({ type: "TaskSubmit", body: { config, seed: Date.now() % 2 ** 31 } });
}

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function polyline(values: number[], width: number, height: number): string {
  if (values.length === 0) return "";
  const max = Math.max(...values, 1e-9);
  const min = Math.min(...values, 0);
  const span = max - min || 1;
  const step = values.length > 1 ? width / (values.length - 1) : 0;
  return values
    .map((v, i) => `${(i * step).toFixed(1)},${(height - ((v - min) / span) * height).toFixed(1)}`)
    .join(" ");
}

function chart(title: string, values: number[]): string {
  const w = 320;
  const h = 120;
  const last = values.length > 0 ? values[values.length - 1] : null;
  return `
    <figure class="chart">
      <figcaption>${title}${last !== null ? ` — ${Number(last.toPrecision(4))}` : ""}</figcaption>
      <svg viewBox="0 0 ${w} ${h}" preserveAspectRatio="none">
        <polyline fill="none" stroke="currentColor" stroke-width="1.5"
                  points="${polyline(values, w, h)}"/>
      </svg>
    </figure>`;
}

function renderCharts(): void {
  const el = $("charts");
  if (state.points.length === 0) {
    el.innerHTML = "<p class=\"muted\">No rounds yet.</p>";
    return;
  }
  el.innerHTML =
    chart("Test accuracy", state.points.map((p) => p.testAccuracy)) +
    chart("Test loss", state.points.map((p) => p.testLoss)) +
    chart("Cumulative bytes up", cumulativeBytesUp(state));
}

function renderStatus(): void {
  $("banner").hidden = state.connection === "open";
  $("banner").textContent =
    state.connection === "closed" ? "Connection lost — reconnecting…" : "Connecting…";
  const status = $("status");
  const bits = [
    state.taskId ? `task ${state.taskId}` : null,
    state.status !== "idle" ? state.status : null,
    state.finalAccuracy !== null ? `final accuracy ${state.finalAccuracy.toFixed(4)}` : null,
    `bytes up ${state.totalBytesUp}`,
    `bytes down ${state.totalBytesDown}`,
  ].filter(Boolean);
  status.textContent = bits.join(" · ");
  $("error").textContent = state.error ?? "";
}

function renderResolvedIntent(): void {
  const box = $("resolved");
  if (!state.resolvedIntent) {
    box.hidden = true;
    return;
  }
  box.hidden = false;
  const cfg = state.resolvedIntent.config as unknown as TaskConfig;
  const defaults = defaultKeys(cfg);
  const rows = Object.entries(state.resolvedIntent.config)
    .map(([k, v]) => {
      const cls = defaults.has(k) ? "default" : "pinned";
      return `<tr class="${cls}"><td>${k}</td><td>${JSON.stringify(v)}</td></tr>`;
    })
    .join("");
  $("resolved-mode").textContent =
    state.resolvedIntent.mode === "fallback" ? "fallback parser" : "remote model";
  $("resolved-mode").className = `badge ${state.resolvedIntent.mode}`;
  $("resolved-table").innerHTML = rows;
}

function renderForm(): void {
  ($("compress-param-row") as HTMLElement).hidden = !compressParamVisible(form);
  const errors = validateForm(form);
  for (const field of Object.keys(form)) {
    const el = document.getElementById(`err-${field}`);
    if (el) el.textContent = errors[field] ?? "";
  }
  ($("submit-form") as HTMLButtonElement).disabled = Object.keys(errors).length > 0;
  const intentText = ($("intent-text") as HTMLTextAreaElement).value.trim();
  ($("submit-intent") as HTMLButtonElement).disabled = intentText.length === 0;
}

function render(): void {
  renderStatus();
  renderCharts();
  renderResolvedIntent();
  renderForm();
}

// ---------------------------------------------------------------------------
// events
// ---------------------------------------------------------------------------

function bind(): void {
  for (const field of Object.keys(defaultForm()) as Array<keyof FormModel>) {
    const input = document.getElementById(`f-${field}`) as HTMLInputElement | null;
    if (!input) continue;
    input.value = form[field];
    input.addEventListener("input", () => {
      form[field] = input.value;
      renderForm();
    });
  }
  $("submit-form").addEventListener("click", () => {
    if (Object.keys(validateForm(form)).length > 0) return;
    submitConfig(JSON.parse(formPayload(form)));
  });
  $("submit-intent").addEventListener("click", () => {
    const text = ($("intent-text") as HTMLTextAreaElement).value.trim();
    if (text) send({ type: "IntentSubmit", body: { text } });
  });
  $("confirm-intent").addEventListener("click", () => {
    if (state.resolvedIntent) {
      submitConfig(state.resolvedIntent.config);
      state.resolvedIntent = null;
      render();
    }
  });
  $("dismiss-intent").addEventListener("click", () => {
    state.resolvedIntent = null;
    render();
  });
  ($("intent-text") as HTMLTextAreaElement).addEventListener("input", renderForm);
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => {
    bind();
    render();
    connect();
  });
}
