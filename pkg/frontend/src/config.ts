/**
 * Client-side mirror of the task-config schema: same enums, same bounds,
 * same defaults, and a canonical serialization that is byte-identical to
 * the server's so form submissions and CLI submissions cannot diverge.
 */

export const ALGOS = ["Classification", "Regression"] as const;
export const SCHEDULERS = ["full", "random", "round_robin", "latency_proportional"] as const;
export const OPTIMIZERS = ["Adam", "SGD", "AdaGrad", "RMSProp"] as const;
export const LOSSES = ["CrossEntropyLoss", "MSELoss"] as const;
export const COMPRESSIONS = ["No", "quantize", "topk", "randk"] as const;

export const DEFAULT_LR: Record<string, number> = {
  Adam: 0.0001,
  SGD: 0.001,
  AdaGrad: 0.004,
  RMSProp: 0.0004,
};

// canonical key emission order (core keys first, added keys after)
export const CORE_KEYS = [
  "algo", "minibatch", "epoch", "lr", "scheduler", "clientFraction",
  "minibatchtest", "comRounds", "optimizer", "loss", "compress", "dataset",
] as const;

export interface TaskConfig {
  algo: string;
  minibatch: number;
  epoch: number;
  lr: number;
  scheduler: string;
  clientFraction: number;
  minibatchtest: number;
  comRounds: number;
  optimizer: string;
  loss: string;
  compress: string;
  dataset: string;
  compressParam?: number;
  dtype?: string;
  taskName?: string;
  clients?: string[];
  model?: unknown;
}

export interface Partial {
  [key: string]: unknown;
}

/** Fill absent keys with their defaults (same rules as the server). */
export function applyDefaults(partial: Partial): TaskConfig {
  const optimizer = String(partial.optimizer ?? "Adam");
  const clientFraction = Number(partial.clientFraction ?? 1);
  const compress = String(partial.compress ?? "No");
  const scheduler =
    partial.scheduler !== undefined
      ? String(partial.scheduler)
      : clientFraction >= 1
        ? "full"
        : "random";
  const cfg: TaskConfig = {
    algo: String(partial.algo ?? "Classification"),
    minibatch: Number(partial.minibatch ?? 16),
    epoch: Number(partial.epoch ?? 5),
    lr: Number(partial.lr ?? DEFAULT_LR[optimizer] ?? 0.0001),
    scheduler,
    clientFraction,
    minibatchtest: Number(partial.minibatchtest ?? 32),
    comRounds: Number(partial.comRounds ?? 10),
    optimizer,
    loss: String(partial.loss ?? "CrossEntropyLoss"),
    compress,
    dataset: String(partial.dataset ?? ""),
  };
  if (compress === "topk" || compress === "randk") {
    cfg.compressParam = Number(partial.compressParam ?? 0.1);
  }
  if (partial.dtype !== undefined && partial.dtype !== "img") cfg.dtype = String(partial.dtype);
  if (partial.taskName) cfg.taskName = String(partial.taskName);
  if (Array.isArray(partial.clients) && partial.clients.length > 0) {
    cfg.clients = partial.clients.map(String);
  }
  if (partial.model !== undefined && partial.model !== null) cfg.model = partial.model;
  return cfg;
}

export interface FieldErrors {
  [field: string]: string;
}

/** Bound and enum checks matching the server's validation exactly. */
export function validateConfig(cfg: TaskConfig): FieldErrors {
  const errors: FieldErrors = {};
  const inEnum = (v: string, values: readonly string[]) => values.includes(v);
  if (!inEnum(cfg.algo, ALGOS)) errors.algo = "unknown algorithm type";
  if (!inEnum(cfg.scheduler, SCHEDULERS)) errors.scheduler = "unknown scheduler";
  if (!inEnum(cfg.optimizer, OPTIMIZERS)) errors.optimizer = "unknown optimizer";
  if (!inEnum(cfg.loss, LOSSES)) errors.loss = "unknown loss";
  if (!inEnum(cfg.compress, COMPRESSIONS)) errors.compress = "unknown compression scheme";
  if (!Number.isInteger(cfg.minibatch) || cfg.minibatch < 1) errors.minibatch = "must be an integer >= 1";
  if (!Number.isInteger(cfg.epoch) || cfg.epoch < 0) errors.epoch = "must be an integer >= 0";
  if (!(cfg.lr > 0)) errors.lr = "must be > 0";
  if (!(cfg.clientFraction > 0 && cfg.clientFraction <= 1)) {
    errors.clientFraction = "must be in (0, 1]";
  }
  if (!Number.isInteger(cfg.minibatchtest) || cfg.minibatchtest < 1) {
    errors.minibatchtest = "must be an integer >= 1";
  }
  if (!Number.isInteger(cfg.comRounds) || cfg.comRounds < 0) {
    errors.comRounds = "must be an integer >= 0";
  }
  if (!cfg.dataset) errors.dataset = "required";
  const sparse = cfg.compress === "topk" || cfg.compress === "randk";
  if (sparse) {
    if (cfg.compressParam === undefined) {
      errors.compressParam = "required for top-k / rand-k";
    } else if (!(cfg.compressParam > 0 && cfg.compressParam <= 1)) {
      errors.compressParam = "must be in (0, 1]";
    }
  } else if (cfg.compressParam !== undefined) {
    errors.compressParam = "only valid for top-k / rand-k";
  }
  return errors;
}

/** Decimal rendering without exponents; integral values lose the dot. */
export function scalarString(value: number | string): string {
  if (typeof value === "string") return value;
  if (Number.isInteger(value) && Math.abs(value) < 1e15) return String(value);
  const s = String(value);
  if (!/e/i.test(s)) return s;
  // expand exponent notation to a plain decimal string
  const [mant, expStr] = s.toLowerCase().split("e");
  const exp = parseInt(expStr, 10);
  const neg = mant.startsWith("-");
  const digits = mant.replace("-", "").replace(".", "");
  const point = (mant.replace("-", "").split(".")[0] || "").length + exp;
  let out: string;
  if (point <= 0) {
    out = "0." + "0".repeat(-point) + digits;
  } else if (point >= digits.length) {
    out = digits + "0".repeat(point - digits.length);
  } else {
    out = digits.slice(0, point) + "." + digits.slice(point);
  }
  return (neg ? "-" : "") + out.replace(/\.$/, "");
}

/**
 * Byte-stable serialization: fixed key order, all scalars as JSON strings,
 * ", " and ": " separators — identical to the server's canonical form.
 */
export function canonicalJson(cfg: TaskConfig): string {
  const parts: string[] = [];
  const push = (key: string, raw: string) => parts.push(`${JSON.stringify(key)}: ${raw}`);
  for (const key of CORE_KEYS) {
    push(key, JSON.stringify(scalarString(cfg[key] as number | string)));
  }
  if (cfg.compressParam !== undefined) {
    push("compressParam", JSON.stringify(scalarString(cfg.compressParam)));
  }
  if (cfg.dtype !== undefined) push("dtype", JSON.stringify(cfg.dtype));
  if (cfg.taskName) push("taskName", JSON.stringify(cfg.taskName));
  if (cfg.clients && cfg.clients.length > 0) {
    push("clients", "[" + cfg.clients.map((c) => JSON.stringify(c)).join(", ") + "]");
  }
  if (cfg.model !== undefined) push("model", JSON.stringify(cfg.model));
  return "{" + parts.join(", ") + "}";
}

/**
 * Keys of a resolved config that still hold their default value, so the
 * intent-confirmation view can highlight what the prompt did not pin down.
 * lr's default depends on the optimizer; the scheduler default follows the
 * client-fraction rule.
 */
export function defaultKeys(cfg: TaskConfig): Set<string> {
  const out = new Set<string>();
  const defaults: Record<string, unknown> = {
    algo: "Classification",
    minibatch: 16,
    epoch: 5,
    lr: DEFAULT_LR[cfg.optimizer] ?? 0.0001,
    scheduler: cfg.clientFraction >= 1 ? "full" : "random",
    clientFraction: 1,
    minibatchtest: 32,
    comRounds: 10,
    optimizer: "Adam",
    loss: "CrossEntropyLoss",
    compress: "No",
  };
  for (const key of Object.keys(defaults)) {
    if (cfg[key as keyof TaskConfig] === defaults[key]) out.add(key);
  }
  if (cfg.compressParam === 0.1) out.add("compressParam");
  return out;
}
