import { describe, expect, it } from "vitest";

import {
  applyDefaults,
  canonicalJson,
  defaultKeys,
  scalarString,
  validateConfig,
} from "../src/config.js";

const REFERENCE_JSON =
  '{"algo": "Classification", "minibatch": "16", "epoch": "5", "lr": "0.0001", ' +
  '"scheduler": "full", "clientFraction": "1", "minibatchtest": "32", ' +
  '"comRounds": "10", "optimizer": "Adam", "loss": "CrossEntropyLoss", ' +
  '"compress": "No", "dataset": "MNIST"}';

describe("applyDefaults", () => {
  it("fills the documented defaults", () => {
    const cfg = applyDefaults({ dataset: "MNIST" });
    expect(cfg.minibatch).toBe(16);
    expect(cfg.epoch).toBe(5);
    expect(cfg.lr).toBe(0.0001);
    expect(cfg.scheduler).toBe("full");
    expect(cfg.clientFraction).toBe(1);
    expect(cfg.minibatchtest).toBe(32);
    expect(cfg.comRounds).toBe(10);
    expect(cfg.optimizer).toBe("Adam");
    expect(cfg.loss).toBe("CrossEntropyLoss");
    expect(cfg.compress).toBe("No");
  });

  it("lr default follows the optimizer", () => {
    expect(applyDefaults({ dataset: "x", optimizer: "SGD" }).lr).toBe(0.001);
    expect(applyDefaults({ dataset: "x", optimizer: "AdaGrad" }).lr).toBe(0.004);
    expect(applyDefaults({ dataset: "x", optimizer: "RMSProp" }).lr).toBe(0.0004);
  });

  it("fractional participation switches the scheduler default to random", () => {
    expect(applyDefaults({ dataset: "x", clientFraction: 0.7 }).scheduler).toBe("random");
    expect(applyDefaults({ dataset: "x", clientFraction: 0.7, scheduler: "full" }).scheduler).toBe("full");
  });

  it("sparse compression gains a default parameter", () => {
    expect(applyDefaults({ dataset: "x", compress: "topk" }).compressParam).toBe(0.1);
    expect(applyDefaults({ dataset: "x" }).compressParam).toBeUndefined();
  });
});

describe("validateConfig", () => {
  it("accepts the defaulted config", () => {
    expect(validateConfig(applyDefaults({ dataset: "MNIST" }))).toEqual({});
  });

  it("rejects out-of-range clientFraction", () => {
    const cfg = applyDefaults({ dataset: "x" });
    cfg.clientFraction = 1.5;
    expect(validateConfig(cfg).clientFraction).toBeTruthy();
    cfg.clientFraction = 0;
    expect(validateConfig(cfg).clientFraction).toBeTruthy();
  });

  it("rejects bad enums and bounds", () => {
    const cfg = applyDefaults({ dataset: "x" });
    expect(validateConfig({ ...cfg, optimizer: "Sgd" }).optimizer).toBeTruthy();
    expect(validateConfig({ ...cfg, minibatch: 0 }).minibatch).toBeTruthy();
    expect(validateConfig({ ...cfg, lr: 0 }).lr).toBeTruthy();
    expect(validateConfig({ ...cfg, dataset: "" }).dataset).toBeTruthy();
  });

  it("requires compressParam only for sparse schemes", () => {
    const cfg = applyDefaults({ dataset: "x", compress: "topk" });
    delete cfg.compressParam;
    expect(validateConfig(cfg).compressParam).toBeTruthy();
    const dense = applyDefaults({ dataset: "x" });
    dense.compressParam = 0.5;
    expect(validateConfig(dense).compressParam).toBeTruthy();
  });
});

describe("scalarString", () => {
  it("renders integers without a dot and floats without exponents", () => {
    expect(scalarString(1)).toBe("1");
    expect(scalarString(0.7)).toBe("0.7");
    expect(scalarString(0.0001)).toBe("0.0001");
    expect(scalarString(1e-7)).toBe("0.0000001");
    expect(scalarString(2.5e-6)).toBe("0.0000025");
    expect(scalarString(16)).toBe("16");
  });
});

describe("canonicalJson", () => {
  it("defaults serialize byte-equal to the reference document", () => {
    expect(canonicalJson(applyDefaults({ dataset: "MNIST" }))).toBe(REFERENCE_JSON);
  });

  it("is stable under a round trip through its own output", () => {
    const once = canonicalJson(applyDefaults({ dataset: "MNIST", lr: 0.004, epoch: 12 }));
    const twice = canonicalJson(applyDefaults(JSON.parse(once)));
    expect(twice).toBe(once);
  });
});

describe("defaultKeys", () => {
  it("marks only the untouched fields", () => {
    const cfg = applyDefaults({ dataset: "x", epoch: 12, optimizer: "SGD" });
    const d = defaultKeys(cfg);
    expect(d.has("epoch")).toBe(false);
    expect(d.has("optimizer")).toBe(false);
    expect(d.has("minibatch")).toBe(true);
    // lr default is SGD's, so an unspecified lr still counts as default
    expect(d.has("lr")).toBe(true);
  });
});
