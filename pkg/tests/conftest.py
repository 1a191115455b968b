from __future__ import annotations

import dataclasses

import pytest

from salesconv.features import load_lexicons
from salesconv.model import TrainingConfig, train_member
from salesconv.orchestrator import GuidanceEngine, build_graph, default_graph_spec, load_snippets
from salesconv.pipeline import (
    Runtime,
    dataset_vocabulary,
    encode_dataset,
    index_from_encoded,
)
from salesconv.synthgen import GeneratorConfig, derive_seed, generate_adversarial, generate_dataset
from salesconv.model import quantize


@pytest.fixture(scope="session")
def lexicons():
    return load_lexicons()


@pytest.fixture(scope="session")
def gen_config():
    return GeneratorConfig()


@pytest.fixture(scope="session")
def small_corpus(gen_config):
    conversations, _ = generate_dataset(600, gen_config, seed=501)
    return conversations


@pytest.fixture(scope="session")
def small_heldout(gen_config):
    conversations, _ = generate_dataset(400, gen_config, seed=502)
    return conversations


@pytest.fixture(scope="session")
def small_encoded(small_corpus):
    return encode_dataset(small_corpus)


@pytest.fixture(scope="session")
def small_train_config():
    return TrainingConfig(ensemble_k=2, epochs_supervised=10, epochs_rl=1, seed=17)


@pytest.fixture(scope="session")
def small_models(small_corpus, small_encoded, small_train_config, gen_config):
    adv = [generate_adversarial(gen_config, derive_seed(0xFACE, i)) for i in range(60)]
    encoded_adv = encode_dataset(adv)
    full = small_encoded + encoded_adv
    models = []
    for i in range(small_train_config.ensemble_k):
        cfg = dataclasses.replace(small_train_config, seed=small_train_config.seed + i)
        model, _ = train_member(full, cfg)
        models.append(model)
    return models


@pytest.fixture(scope="session")
def small_index(small_corpus, small_encoded):
    vocab = dataset_vocabulary(small_corpus)
    return index_from_encoded(small_encoded, vocab, 256, max_entries=4000)


@pytest.fixture(scope="session")
def small_runtime(small_models, small_index):
    return Runtime(
        models=small_models,
        quantized=[quantize(m) for m in small_models],
        index=small_index,
        use_quantized=True,
    )


@pytest.fixture(scope="session")
def guidance_engine():
    return GuidanceEngine(build_graph(default_graph_spec()), load_snippets())
