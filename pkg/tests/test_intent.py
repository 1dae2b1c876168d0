import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedforge.config import DataConfig, apply_defaults, canonical_json
from fedforge.errors import (
    GatewayUnreachable,
    InvalidArchitecture,
    InvalidLlmOutput,
    UnrecognizedIntent,
)
from fedforge.intent import (
    ARCH_ERROR_PROMPT_TEMPLATE,
    build_arch_prompt,
    builtin_model_spec,
    fallback_parse,
    request_model_spec,
    translate_intent,
)
from fedforge.modelspec import ModelSpec


# Each entry: (prompt, expected extracted fields). The expectation is written
# by hand from the sentence semantics, not derived from the parser.
CORPUS = [
    ("Create a federated learning task with MNIST dataset.",
     {"dataset": "MNIST"}),
    ("Create a federated learning task with MNIST dataset with a client fraction of 0.7.",
     {"dataset": "MNIST", "clientFraction": 0.7}),
    ("Perform a federated learning task with MNIST dataset involving 70% of the total clients.",
     {"dataset": "MNIST", "clientFraction": 0.7}),
    ("Execute a federated learning task with MNIST dataset involving 7/10 of the total clients.",
     {"dataset": "MNIST", "clientFraction": 0.7}),
    ("Start a federated learning task with MNIST dataset by omitting 30% of total clients in each communication round.",
     {"dataset": "MNIST", "clientFraction": 0.7}),
    ("Create a federated learning task with MNIST dataset. Run for a total of 20 "
     "communication rounds and 12 local epochs. Use SGD as the optimizer with a "
     "learning rate of 0.004. Use a mini-batch size of 32 for training. The "
     "client fraction should be 0.7.",
     {"dataset": "MNIST", "comRounds": 20, "epoch": 12, "optimizer": "SGD",
      "lr": 0.004, "minibatch": 32, "clientFraction": 0.7}),
    ("Run a classification task on the CIFAR10 dataset for 30 rounds.",
     {"dataset": "CIFAR10", "comRounds": 30, "algo": "Classification"}),
    ("Train a regression model using the housing dataset with a learning rate of 0.01.",
     {"dataset": "housing", "lr": 0.01, "algo": "Regression"}),
    ("Run training on the fashion dataset for 15 rounds and 3 local epochs.",
     {"dataset": "fashion", "comRounds": 15, "epoch": 3}),
    ("Perform federated learning with the digits dataset using the Adam optimizer.",
     {"dataset": "digits", "optimizer": "Adam"}),
    ("Train on the blobs dataset with RMSProp for 8 rounds.",
     {"dataset": "blobs", "optimizer": "RMSProp", "comRounds": 8}),
    ("Train on the blobs dataset with AdaGrad and a learning rate of 0.004.",
     {"dataset": "blobs", "optimizer": "AdaGrad", "lr": 0.004}),
    ("Run 25 rounds of federated learning on the moons dataset with SGD.",
     {"dataset": "moons", "comRounds": 25, "optimizer": "SGD"}),
    ("Create a task with the MNIST dataset using a batch size of 64.",
     {"dataset": "MNIST", "minibatch": 64}),
    ("Create a task with the MNIST dataset using a batch size of 64 for test.",
     {"dataset": "MNIST", "minibatchtest": 64}),
    ("Create a task with the MNIST dataset with a test batch size of 128.",
     {"dataset": "MNIST", "minibatchtest": 128}),
    ("Create a task with the MNIST dataset with minibatch size of 8 and test batch size of 16.",
     {"dataset": "MNIST", "minibatch": 8, "minibatchtest": 16}),
    ("Use quantization to compress updates when training on the MNIST dataset.",
     {"dataset": "MNIST", "compress": "quantize"}),
    ("Train on the MNIST dataset and quantize the model updates.",
     {"dataset": "MNIST", "compress": "quantize"}),
    ("Train on the MNIST dataset using top-k sparsification with sparsity of 0.2.",
     {"dataset": "MNIST", "compress": "topk", "compressParam": 0.2}),
    ("Train on the MNIST dataset using rand-k compression with a compression parameter of 0.3.",
     {"dataset": "MNIST", "compress": "randk", "compressParam": 0.3}),
    ("Train on the MNIST dataset with topk compression and sparsity of 0.05.",
     {"dataset": "MNIST", "compress": "topk", "compressParam": 0.05}),
    ("Use a round robin scheduler when training on the MNIST dataset.",
     {"dataset": "MNIST", "scheduler": "round_robin"}),
    ("Use a round-robin scheduler with the MNIST dataset involving 50% of the total clients.",
     {"dataset": "MNIST", "scheduler": "round_robin", "clientFraction": 0.5}),
    ("Use a latency proportional scheduler when training on the MNIST dataset.",
     {"dataset": "MNIST", "scheduler": "latency_proportional"}),
    ("Train on the MNIST dataset and schedule clients randomly.",
     {"dataset": "MNIST", "scheduler": "random"}),
    ("Train on the MNIST dataset with full participation in every round.",
     {"dataset": "MNIST", "scheduler": "full"}),
    ("Run a federated task on the iris dataset with cross entropy loss.",
     {"dataset": "iris", "loss": "CrossEntropyLoss"}),
    ("Run a federated regression task on the energy dataset with MSE loss.",
     {"dataset": "energy", "loss": "MSELoss", "algo": "Regression"}),
    ("Run a regression task on the prices dataset with mean squared error loss.",
     {"dataset": "prices", "loss": "MSELoss", "algo": "Regression"}),
    ("Train for 7 epochs on the MNIST dataset.",
     {"dataset": "MNIST", "epoch": 7}),
    ("Train on the MNIST dataset with a learning rate of 0.0005 for 40 rounds.",
     {"dataset": "MNIST", "lr": 0.0005, "comRounds": 40}),
    ("Train on the MNIST dataset with a learning rate of 1e-4.",
     {"dataset": "MNIST", "lr": 0.0001}),
    ("Create a task using the speech dataset involving 0.25 of the total clients.",
     {"dataset": "speech", "clientFraction": 0.25}),
    ("Create a task with the sensor dataset omitting 1/4 of the total clients.",
     {"dataset": "sensor", "clientFraction": 0.75}),
    ("Run federated learning on the MNIST dataset with client fraction 0.4 and a round robin scheduler.",
     {"dataset": "MNIST", "clientFraction": 0.4, "scheduler": "round_robin"}),
    ("Run a classification task on the CIFAR10 dataset for 50 rounds with 2 epochs, "
     "batch size of 128 and a learning rate of 0.002 using SGD.",
     {"dataset": "CIFAR10", "algo": "Classification", "comRounds": 50, "epoch": 2,
      "minibatch": 128, "lr": 0.002, "optimizer": "SGD"}),
    ("Quantize updates and train on the traffic dataset for 12 rounds involving 80% of the total clients.",
     {"dataset": "traffic", "compress": "quantize", "comRounds": 12, "clientFraction": 0.8}),
    ("Train on the weather dataset with latency aware scheduling and a batch size of 32.",
     {"dataset": "weather", "scheduler": "latency_proportional", "minibatch": 32}),
    ("Perform classification on the spam dataset with adam, cross-entropy loss and 6 epochs.",
     {"dataset": "spam", "algo": "Classification", "optimizer": "Adam",
      "loss": "CrossEntropyLoss", "epoch": 6}),
]


def test_corpus_has_forty_prompts():
    assert len(CORPUS) == 40


@pytest.mark.parametrize("prompt,expected", CORPUS, ids=range(len(CORPUS)))
def test_fallback_extraction_exact(prompt, expected):
    assert fallback_parse(prompt) == expected


@pytest.mark.parametrize("prompt,expected", CORPUS, ids=range(len(CORPUS)))
def test_fallback_translation_yields_exact_config(prompt, expected, monkeypatch):
    monkeypatch.delenv("FEDFORGE_LLM_URL", raising=False)
    assert translate_intent(prompt) == apply_defaults(expected)


def test_fraction_phrasings_agree():
    prompts = [
        "Create a federated learning task with MNIST dataset with a client fraction of 0.7.",
        "Perform a federated learning task with MNIST dataset involving 70% of the total clients.",
        "Execute a federated learning task with MNIST dataset involving 7/10 of the total clients.",
        "Start a federated learning task with MNIST dataset by omitting 30% of total clients in each communication round.",
    ]
    configs = {canonical_json(translate_intent(p, gateway=None)) for p in prompts}
    assert len(configs) == 1
    cfg = translate_intent(prompts[0], gateway=None)
    assert cfg.clientFraction == 0.7
    assert cfg.scheduler == "random"


def test_detailed_prompt_full_config():
    cfg = translate_intent(CORPUS[5][0], gateway=None)
    assert cfg.algo == "Classification"
    assert cfg.minibatch == 32
    assert cfg.epoch == 12
    assert cfg.lr == 0.004
    assert cfg.scheduler == "random"
    assert cfg.clientFraction == 0.7
    assert cfg.minibatchtest == 32
    assert cfg.comRounds == 20
    assert cfg.optimizer == "SGD"
    assert cfg.loss == "CrossEntropyLoss"
    assert cfg.compress == "No"
    assert cfg.dataset == "MNIST"


def test_unrecognized_intent():
    with pytest.raises(UnrecognizedIntent):
        translate_intent("hello there", gateway=None)
    with pytest.raises(UnrecognizedIntent):
        translate_intent("   ", gateway=None)


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=300))
def test_fallback_parse_total_on_arbitrary_text(text):
    out = fallback_parse(text)
    assert isinstance(out, dict)


class StubGateway:
    """Canned-response stand-in for the HTTP gateway."""

    def __init__(self, translate_reply=None, arch_replies=()):
        self.translate_reply = translate_reply
        self.arch_replies = list(arch_replies)
        self.arch_prompts = []

    def translate(self, intent):
        return self.translate_reply

    def architecture(self, prompt):
        self.arch_prompts.append(prompt)
        return self.arch_replies.pop(0)


def test_remote_translation_used_when_gateway_given():
    gw = StubGateway(translate_reply=json.dumps({"dataset": "MNIST", "epoch": "3"}))
    cfg = translate_intent("whatever", gateway=gw)
    assert cfg.dataset == "MNIST"
    assert cfg.epoch == 3


def test_remote_translation_invalid_json():
    gw = StubGateway(translate_reply="not json at all")
    with pytest.raises(InvalidLlmOutput):
        translate_intent("x", gateway=gw)


def test_remote_translation_schema_violation():
    gw = StubGateway(translate_reply=json.dumps({"dataset": "M", "clientFraction": "1.7"}))
    with pytest.raises(InvalidLlmOutput):
        translate_intent("x", gateway=gw)


DCFG = DataConfig((1, 4), 200, "Classification", 3)


def test_arch_prompt_classification():
    p = build_arch_prompt(DCFG)
    assert p == (
        "Create a model architecture for the following task. The task is a "
        "Classification task with 3 labels. The input data is a tensor of shape "
        "(1,4) and has 200 datapoints altogether. Considering the above "
        "information, create a neural network architecture that could achieve "
        "good accuracy."
    )


def test_arch_prompt_regression_elides_labels():
    p = build_arch_prompt(DataConfig((1, 4), 200, "Regression", 1))
    assert "Regression task" in p
    assert "labels" not in p


def test_builtin_model_spec_deterministic_and_valid():
    a = builtin_model_spec(DCFG)
    b = builtin_model_spec(DCFG)
    assert a == b
    a.validate()
    assert a.layers[0].in_dim == 4
    assert a.layers[-1].out_dim == 3
    assert 16 <= a.layers[0].out_dim <= 256


def test_builtin_spec_used_without_gateway():
    assert request_model_spec(DCFG, gateway=None) == builtin_model_spec(DCFG)


def good_layers():
    return {"layers": [
        {"in": 4, "out": 8, "activation": "relu"},
        {"in": 8, "out": 3, "activation": "none"},
    ]}


def test_gateway_architecture_accepted():
    gw = StubGateway(arch_replies=[good_layers()])
    spec = request_model_spec(DCFG, gateway=gw)
    assert isinstance(spec, ModelSpec)
    assert spec.num_params == (4 * 8 + 8) + (8 * 3 + 3)
    assert len(gw.arch_prompts) == 1


def test_gateway_bad_architecture_retried_once_with_error_prompt():
    bad = {"layers": [{"in": 4, "out": 8}, {"in": 9, "out": 3}]}  # broken chain
    gw = StubGateway(arch_replies=[bad, good_layers()])
    spec = request_model_spec(DCFG, gateway=gw)
    assert spec.layers[0].out_dim == 8
    assert len(gw.arch_prompts) == 2
    # the retry prompt carries the rejected model and the validation error
    head = ARCH_ERROR_PROMPT_TEMPLATE.split("{", 1)[0]
    assert gw.arch_prompts[1].startswith(head)
    assert "chain" in gw.arch_prompts[1]


def test_gateway_twice_bad_architecture_raises():
    bad = {"layers": [{"in": 4, "out": 8}, {"in": 9, "out": 3}]}
    gw = StubGateway(arch_replies=[bad, bad])
    with pytest.raises(InvalidArchitecture):
        request_model_spec(DCFG, gateway=gw)
    assert len(gw.arch_prompts) == 2


def test_gateway_unreachable_surfaces():
    class DeadGateway:
        def architecture(self, prompt):
            raise GatewayUnreachable("down")

        def translate(self, intent):
            raise GatewayUnreachable("down")

    with pytest.raises(GatewayUnreachable):
        request_model_spec(DCFG, gateway=DeadGateway())
    with pytest.raises(GatewayUnreachable):
        translate_intent("x", gateway=DeadGateway())
