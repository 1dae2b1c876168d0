"""Natural-language intent translation and model-architecture requests.

A remote HTTP gateway (any endpoint speaking the /v1/intent and /v1/arch
contracts, e.g. a hosted fine-tuned model) is used when configured; otherwise a
deterministic rule-based fallback keeps the whole system testable offline.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass

import httpx

from .config import (
    COMPRESSIONS,
    OPTIMIZERS,
    TaskConfig,
    apply_defaults,
)
from .errors import (
    ConfigError,
    GatewayUnreachable,
    InvalidArchitecture,
    InvalidLlmOutput,
    UnrecognizedIntent,
)
from .config import DataConfig
from .modelspec import LayerSpec, ModelSpec, mlp_spec

ENV_GATEWAY_URL = "FEDFORGE_LLM_URL"

# Static instruction sent with every intent; the remote model was tuned
# against exactly this text, so it must never vary between requests.
SYSTEM_PROMPT = (
    "Your task is to provide a JSON given an instruction by the user for a "
    "federated learning task. The output should be in JSON format. Keys for "
    "JSON are algo - Classification/Regression, minibatch - size of minibatch "
    "(16), epoch- number of epochs(5), lr - learning rate, scheduler - "
    "full/random/round_robin/latency_proportional(full), clientFraction- "
    "fraction of clients involved in federated learning (1),comRounds- number "
    "of communication rounds in federated learning(10), optimizer-pytorch "
    "optimizer(Adam), loss(CrossEntropyLoss), compress- No/quantize(No), "
    "dtype-img(img),dataset-dataset used for training. Default values for "
    "each key are given inside the bracket. Separated by / are possible "
    "values for the relevant key. Your task is to create a JSON with the "
    "above keys and extract possible values from a given human prompt as "
    "values for the JSON. Respond only to the JSON."
)

ARCH_PROMPT_TEMPLATE = (
    "Create a model architecture for the following task. The task is a "
    "{task_clause}. The input data is a tensor of shape {shape} and has "
    "{datapoints} datapoints altogether. Considering the above information, "
    "create a neural network architecture that could achieve good accuracy."
)

ARCH_ERROR_PROMPT_TEMPLATE = (
    "The suggested model {model} gives the following error {error}. Please "
    "suggest a new model architecture with similar parameter complexity that "
    "conforms with the dimensions of the input and output correctly to avoid "
    "the above error. The input is a tensor of shape {shape} and the output "
    "has {outputs} values."
)


@dataclass
class LlmGateway:
    """HTTP client for the intent/architecture endpoints."""

    endpoint: str
    timeout: float = 30.0

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = httpx.post(
                self.endpoint.rstrip("/") + path, json=payload, timeout=self.timeout
            )
            resp.raise_for_status()
            return resp.json()
        except (httpx.HTTPError, json.JSONDecodeError) as e:
            raise GatewayUnreachable(f"{self.endpoint}{path}: {e}") from e

    def translate(self, intent: str) -> str:
        out = self._post("/v1/intent", {"system": SYSTEM_PROMPT, "intent": intent})
        if not isinstance(out, dict) or "json" not in out:
            raise InvalidLlmOutput(f"gateway reply missing 'json' field: {out!r}")
        return str(out["json"])

    def architecture(self, prompt: str) -> dict:
        out = self._post("/v1/arch", {"prompt": prompt})
        if not isinstance(out, dict) or "layers" not in out:
            raise InvalidLlmOutput(f"gateway reply missing 'layers' field: {out!r}")
        return out


def default_gateway() -> LlmGateway | None:
    url = os.environ.get(ENV_GATEWAY_URL, "").strip()
    return LlmGateway(url) if url else None


_NUM = r"(\d+(?:\.\d+)?(?:e-?\d+)?)"

_DATASET_RES = [
    re.compile(r"(?:with|using|on|for)\s+(?:the\s+)?([A-Za-z][\w\-]*)\s+dataset", re.I),
    re.compile(r"dataset\s*[:=]?\s*([A-Za-z][\w\-]*)", re.I),
]

_OPTIMIZER_WORDS = {
    "adam": "Adam",
    "sgd": "SGD",
    "adagrad": "AdaGrad",
    "rmsprop": "RMSProp",
}


def _find_fraction(text: str) -> float | None:
    m = re.search(rf"client\s*fraction\s*(?:should\s+be|of|is|=|:)?\s*{_NUM}", text, re.I)
    if m:
        return float(m.group(1))
    m = re.search(rf"(?:involving|using|with|utiliz\w+)\s+{_NUM}\s*%\s*of\s+(?:the\s+)?(?:total\s+)?clients", text, re.I)
    if m:
        return float(m.group(1)) / 100.0
    m = re.search(r"(?:involving|using|with|utiliz\w+)\s+(\d+)\s*/\s*(\d+)\s+of\s+(?:the\s+)?(?:total\s+)?clients", text, re.I)
    if m:
        return int(m.group(1)) / int(m.group(2))
    m = re.search(rf"omitting\s+{_NUM}\s*%\s*of\s+(?:the\s+)?(?:total\s+)?clients", text, re.I)
    if m:
        return 1.0 - float(m.group(1)) / 100.0
    m = re.search(r"omitting\s+(\d+)\s*/\s*(\d+)\s+of\s+(?:the\s+)?(?:total\s+)?clients", text, re.I)
    if m:
        return 1.0 - int(m.group(1)) / int(m.group(2))
    m = re.search(rf"(?:involving|using)\s+(?:a\s+fraction\s+of\s+)?{_NUM}\s+of\s+(?:the\s+)?(?:total\s+)?clients", text, re.I)
    if m:
        return float(m.group(1))
    return None


def fallback_parse(text: str) -> dict:
    """Rule-based intent extraction; total on arbitrary input, never raises."""
    out: dict = {}
    if not isinstance(text, str) or not text:
        return out
    try:
        for rex in _DATASET_RES:
            m = rex.search(text)
            if m and m.group(1).lower() != "the":
                out["dataset"] = m.group(1)
                break

        m = re.search(r"(\d+)\s+(?:communication\s+)?rounds", text, re.I)
        if m:
            out["comRounds"] = int(m.group(1))
        m = re.search(r"(\d+)\s+(?:local\s+)?epochs?", text, re.I)
        if m:
            out["epoch"] = int(m.group(1))
        m = re.search(rf"(?:mini-?\s?batch|batch)\s+size\s+of\s+{_NUM}\s+for\s+test", text, re.I)
        if m:
            out["minibatchtest"] = int(float(m.group(1)))
        m = re.search(
            rf"(?<!test )(?<!Test )(?<!mini-)(?<!mini )(?:mini-?\s?batch|batch)\s+size\s+"
            rf"(?:of\s+|should\s+be\s+|=\s*|:\s*)?{_NUM}\b(?!\s+for\s+test)",
            text,
            re.I,
        )
        if m:
            out["minibatch"] = int(float(m.group(1)))
        m = re.search(rf"test\s+(?:mini-?\s?batch|batch)\s+size\s+(?:of\s+)?{_NUM}", text, re.I)
        if m:
            out["minibatchtest"] = int(float(m.group(1)))
        m = re.search(rf"learning\s+rate\s+(?:of\s+|should\s+be\s+|=\s*|:\s*)?{_NUM}", text, re.I)
        if m:
            out["lr"] = float(m.group(1))

        fraction = _find_fraction(text)
        if fraction is not None:
            out["clientFraction"] = round(fraction, 10)

        lowered = text.lower()
        for word, name in _OPTIMIZER_WORDS.items():
            if re.search(rf"\b{word}\b", lowered):
                out["optimizer"] = name
                break
        if re.search(r"cross[\s-]?entropy", lowered):
            out["loss"] = "CrossEntropyLoss"
        elif re.search(r"\bmse\b|mean\s+squared", lowered):
            out["loss"] = "MSELoss"

        if re.search(r"quantiz", lowered):
            out["compress"] = "quantize"
        elif re.search(r"top[\s-]?k", lowered):
            out["compress"] = "topk"
        elif re.search(r"rand(?:om)?[\s-]?k", lowered):
            out["compress"] = "randk"
        m = re.search(rf"(?:compression\s+(?:parameter|fraction)|sparsity)\s+(?:of\s+|=\s*|:\s*)?{_NUM}", text, re.I)
        if m and out.get("compress") in ("topk", "randk"):
            out["compressParam"] = float(m.group(1))

        if re.search(r"round[\s-]?robin", lowered):
            out["scheduler"] = "round_robin"
        elif re.search(r"latency", lowered):
            out["scheduler"] = "latency_proportional"
        elif re.search(r"full\s+(?:scheduler|participation)|all\s+clients\s+(?:in\s+)?every\s+round", lowered):
            out["scheduler"] = "full"
        elif re.search(r"random\s+schedul|schedul\w*\s+(?:clients\s+)?randomly|select\s+clients\s+randomly", lowered):
            out["scheduler"] = "random"

        if re.search(r"\bregression\b", lowered):
            out["algo"] = "Regression"
        elif re.search(r"\bclassification\b", lowered):
            out["algo"] = "Classification"
    except Exception:
        # extraction is best effort; partial results are still useful
        pass
    return out


def translate_intent(text: str, gateway: LlmGateway | None = None) -> TaskConfig:
    """Resolve an intent into a fully defaulted, validated task configuration."""
    if not text or not text.strip():
        raise UnrecognizedIntent("empty intent")
    if gateway is None:
        gateway = default_gateway()
    if gateway is not None:
        reply = gateway.translate(text)
        try:
            raw = json.loads(reply)
            if not isinstance(raw, dict):
                raise InvalidLlmOutput(f"gateway returned non-object JSON: {reply!r}")
            return apply_defaults(raw)
        except json.JSONDecodeError as e:
            raise InvalidLlmOutput(f"gateway returned invalid JSON: {reply!r} ({e})") from e
        except ConfigError as e:
            raise InvalidLlmOutput(f"gateway output violates schema: {e}") from e
    partial = fallback_parse(text)
    if "dataset" not in partial:
        raise UnrecognizedIntent("could not find a dataset name in the intent")
    return apply_defaults(partial)


def build_arch_prompt(d: DataConfig) -> str:
    """Architecture request text with placeholders filled from the data config."""
    if d.task == "Classification":
        task_clause = f"Classification task with {d.numLabels} labels"
    else:
        task_clause = "Regression task"
    shape = "(" + ",".join(str(v) for v in d.shape) + ")"
    return ARCH_PROMPT_TEMPLATE.format(
        task_clause=task_clause, shape=shape, datapoints=d.numDatapoints
    )


def builtin_model_spec(d: DataConfig) -> ModelSpec:
    """Deterministic MLP heuristic: two hidden layers, width from the dim product."""
    in_dim = math.prod(d.shape)
    out_dim = d.numLabels if d.task == "Classification" else 1
    width = int(min(max(round(4 * math.sqrt(in_dim * out_dim)), 16), 256))
    return mlp_spec(tuple(d.shape), [width, width], out_dim)


def _spec_from_gateway(reply: dict, d: DataConfig) -> ModelSpec:
    out_dim = d.numLabels if d.task == "Classification" else 1
    return ModelSpec.from_dict(
        {
            "layers": [
                {
                    "in": l.get("in"),
                    "out": l.get("out"),
                    "activation": l.get("activation", "relu"),
                }
                for l in reply["layers"]
            ],
            "inputShape": list(d.shape),
            "outputDim": out_dim,
        }
    )


def request_model_spec(d: DataConfig, gateway: LlmGateway | None = None) -> ModelSpec:
    """Obtain a validated architecture for the data config.

    A broken remote suggestion triggers exactly one corrective retry carrying
    the validation error; a second failure surfaces InvalidArchitecture.
    """
    d.validate()
    if gateway is None:
        gateway = default_gateway()
    if gateway is None:
        return builtin_model_spec(d)

    prompt = build_arch_prompt(d)
    reply = gateway.architecture(prompt)
    try:
        return _spec_from_gateway(reply, d)
    except InvalidArchitecture as first_error:
        shape = "(" + ",".join(str(v) for v in d.shape) + ")"
        outputs = d.numLabels if d.task == "Classification" else 1
        retry_prompt = ARCH_ERROR_PROMPT_TEMPLATE.format(
            model=json.dumps(reply.get("layers", [])),
            error=str(first_error),
            shape=shape,
            outputs=outputs,
        )
        retry = gateway.architecture(retry_prompt)
        try:
            return _spec_from_gateway(retry, d)
        except InvalidArchitecture as second_error:
            raise InvalidArchitecture(
                f"gateway failed twice: {first_error}; retry: {second_error}"
            ) from second_error
