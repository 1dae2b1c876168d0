/**
 * Web-form model: one field per form row, string-typed as the inputs
 * deliver them, converted and validated into a task config on submit.
 */

import {
  FieldErrors,
  TaskConfig,
  applyDefaults,
  canonicalJson,
  validateConfig,
} from "./config.js";

export interface FormModel {
  taskName: string;
  host: string;
  clients: string; // comma separated
  algo: string;
  minibatch: string;
  epoch: string;
  lr: string;
  scheduler: string;
  clientFraction: string;
  minibatchtest: string;
  comRounds: string;
  optimizer: string;
  loss: string;
  compress: string;
  compressParam: string;
  dataset: string;
}

export function defaultForm(): FormModel {
  return {
    taskName: "",
    host: "ws://localhost:8080",
    clients: "",
    algo: "Classification",
    minibatch: "16",
    epoch: "5",
    lr: "",
    scheduler: "",
    clientFraction: "1",
    minibatchtest: "32",
    comRounds: "10",
    optimizer: "Adam",
    loss: "CrossEntropyLoss",
    compress: "No",
    compressParam: "0.1",
    dataset: "MNIST",
  };
}

/** Whether the compression-parameter slider applies to the chosen scheme. */
export function compressParamVisible(form: FormModel): boolean {
  return form.compress === "topk" || form.compress === "randk";
}

const numeric = (s: string): number | undefined => (s.trim() === "" ? undefined : Number(s));

export function toConfig(form: FormModel): TaskConfig {
  const partial: Record<string, unknown> = {
    algo: form.algo,
    scheduler: form.scheduler.trim() === "" ? undefined : form.scheduler,
    optimizer: form.optimizer,
    loss: form.loss,
    compress: form.compress,
    dataset: form.dataset.trim(),
    minibatch: numeric(form.minibatch),
    epoch: numeric(form.epoch),
    lr: numeric(form.lr),
    clientFraction: numeric(form.clientFraction),
    minibatchtest: numeric(form.minibatchtest),
    comRounds: numeric(form.comRounds),
  };
  if (compressParamVisible(form)) {
    partial.compressParam = numeric(form.compressParam);
  }
  if (form.taskName.trim()) partial.taskName = form.taskName.trim();
  const clients = form.clients.split(",").map((c) => c.trim()).filter(Boolean);
  if (clients.length > 0) partial.clients = clients;
  for (const key of Object.keys(partial)) {
    if (partial[key] === undefined) delete partial[key];
  }
  return applyDefaults(partial);
}

/** Validate the form; NaN conversions surface as per-field errors. */
export function validateForm(form: FormModel): FieldErrors {
  const errors: FieldErrors = {};
  const numbers: Array<[keyof FormModel, string]> = [
    ["minibatch", "minibatch"],
    ["epoch", "epoch"],
    ["lr", "lr"],
    ["clientFraction", "clientFraction"],
    ["minibatchtest", "minibatchtest"],
    ["comRounds", "comRounds"],
  ];
  for (const [field] of numbers) {
    const raw = form[field];
    if (raw.trim() !== "" && Number.isNaN(Number(raw))) {
      errors[field] = "not a number";
    }
  }
  if (compressParamVisible(form) && Number.isNaN(Number(form.compressParam))) {
    errors.compressParam = "not a number";
  }
  if (Object.keys(errors).length > 0) return errors;
  return validateConfig(toConfig(form));
}

/** The exact bytes sent inside TaskSubmit for this form. */
export function formPayload(form: FormModel): string {
  return canonicalJson(toConfig(form));
}
