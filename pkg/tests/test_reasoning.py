"""Categorizer, classifier heads, the SFN reasoner and answer fusion."""

import numpy as np
import pytest
import torch

from sfn_vqa.core.exceptions import ModelError
from sfn_vqa.data import build_answer_dictionaries, build_global_dictionary, build_vocabulary
from sfn_vqa.data.batching import QuestionImageDataset, collate_batch
from sfn_vqa.data.dictionaries import AnswerDictionary
from sfn_vqa.data.types import CategoryLabel
from sfn_vqa.models import (
    FusedRepresentation,
    FusionStage,
    IF1CModel,
    QuestionCategorizer,
    SFNModel,
    SFNReasoner,
    SupportNetwork,
    TwoLayerClassifier,
    answer_fusion,
)
from sfn_vqa.models.reasoning import global_prediction

C1, C2, C3, C4, BINARY = CategoryLabel

DICTIONARIES = {
    C1: AnswerDictionary(C1, ("ct", "mri")),
    C2: AnswerDictionary(C2, ("axial", "sagittal", "coronal")),
    C3: AnswerDictionary(C3, ("lung",)),
    C4: AnswerDictionary(C4, ("mass", "cyst", "glioma", "fracture")),
    BINARY: AnswerDictionary(BINARY, ("yes", "no")),
}
COUNTS = {c: len(d) for c, d in DICTIONARIES.items()}


def head_logits(**overrides):
    heads = {c: np.zeros(COUNTS[c]) for c in CategoryLabel}
    heads.update({CategoryLabel(k if k != "B" else "Binary"): np.asarray(v, dtype=float) for k, v in overrides.items()})
    return heads


def test_categorizer_distribution():
    torch.manual_seed(0)
    categorizer = QuestionCategorizer(vocab_size=10, embedding_dim=4, hidden_dim=6, fc_dim=8)
    dist = categorizer.distribution(torch.tensor([[2, 3, 4], [5, 0, 0]]), torch.tensor([3, 1]))
    assert dist.shape == (2, 5)
    assert torch.allclose(dist.sum(dim=-1), torch.ones(2))


def test_heads_need_classes():
    with pytest.raises(ModelError):
        TwoLayerClassifier(4, 8, 0)
    with pytest.raises(ModelError):
        SupportNetwork(4, 8, 3, 0)


def test_support_network_fact_is_non_negative():
    torch.manual_seed(1)
    network = SupportNetwork(in_dim=5, hidden_dim=7, support_dim=3, n_classes=4).eval()
    fact, logits = network(torch.randn(6, 5))
    assert fact.shape == (6, 3)
    assert logits.shape == (6, 4)
    assert torch.all(fact >= 0)


@pytest.mark.parametrize("facts, width", [(True, 10 + 3 * 4), (False, 10)])
def test_reasoner_head_widths(facts, width):
    reasoner = SFNReasoner(10, COUNTS, classifier_dim=16, support_dim=4, facts=facts).eval()
    assert reasoner.head_input_dim == width
    assert reasoner.heads["C4"].fc1.in_features == width
    logits, supporting = reasoner(FusedRepresentation(torch.randn(3, 10), FusionStage.II))
    for category, count in COUNTS.items():
        assert logits[category].shape == (3, count)
    assert supporting.plane.shape == (3, 4)


def test_reasoner_rejects_wrong_stage_and_empty_heads():
    reasoner = SFNReasoner(10, COUNTS, classifier_dim=16, support_dim=4)
    with pytest.raises(ModelError):
        reasoner(FusedRepresentation(torch.randn(1, 10), FusionStage.I))
    with pytest.raises(ModelError, match="C3"):
        SFNReasoner(10, {**COUNTS, C3: 0})


def test_answer_fusion_routes_to_argmax_category():
    prediction = answer_fusion([0.1, 0.6, 0.1, 0.1, 0.1], head_logits(C2=[0.0, 2.0, 1.0]), DICTIONARIES)
    assert prediction.category is C2
    assert prediction.answer == "sagittal"
    expected = np.exp(2.0) / (np.exp(0.0) + np.exp(2.0) + np.exp(1.0))
    assert prediction.confidence == pytest.approx(expected, abs=1e-12)


def test_answer_fusion_ties_pick_the_lowest_index():
    prediction = answer_fusion([0.4, 0.4, 0.1, 0.05, 0.05], head_logits(C1=[1.0, 1.0]), DICTIONARIES)
    assert prediction.category is C1
    assert prediction.answer == "ct"
    assert prediction.confidence == pytest.approx(0.5)


def test_answer_fusion_binary_route():
    prediction = answer_fusion([0, 0, 0, 0, 1], head_logits(B=[-1.0, 3.0]), DICTIONARIES)
    assert (prediction.category, prediction.answer) == (BINARY, "no")


@pytest.mark.parametrize("seed", range(10))
def test_answer_fusion_ignores_positive_scaling_and_shifting_of_category_scores(seed):
    rng = np.random.default_rng(seed)
    scores = rng.normal(size=5)
    heads = {c: rng.normal(size=COUNTS[c]) for c in CategoryLabel}
    reference = answer_fusion(scores, heads, DICTIONARIES)
    for scale, shift in ((0.5, 0.0), (3.0, -2.0), (100.0, 7.0), (1.0, -50.0)):
        prediction = answer_fusion(scale * scores + shift, heads, DICTIONARIES)
        assert (prediction.category, prediction.answer) == (reference.category, reference.answer)
        assert prediction.confidence == reference.confidence


def test_answer_fusion_errors():
    heads = head_logits()
    del heads[C4]
    with pytest.raises(ModelError, match="C4"):
        answer_fusion([1, 0, 0, 0, 0], heads, DICTIONARIES)
    with pytest.raises(ModelError):
        answer_fusion([1, 0, 0, 0, 0], head_logits(C1=[0.0, 1.0, 2.0]), DICTIONARIES)


def test_global_prediction_category_is_first_dictionary_with_the_answer():
    dictionary = AnswerDictionary(None, ("ct", "yes", "unknown finding"))
    assert global_prediction([3.0, 0.0, 0.0], dictionary, DICTIONARIES).category is C1
    assert global_prediction([0.0, 3.0, 0.0], dictionary, DICTIONARIES).category is BINARY
    assert global_prediction([0.0, 0.0, 3.0], dictionary, DICTIONARIES).category is C4


def small_batch(splits, config, n=6):
    train = splits["train"]
    dictionaries = build_answer_dictionaries(train)
    dataset = QuestionImageDataset(
        train, build_vocabulary(train), config.data, dictionaries, build_global_dictionary(train)
    )
    return collate_batch([dataset[i] for i in range(n)]), dictionaries


def test_sfn_model_forward_and_frozen_categorizer(splits, config):
    torch.manual_seed(4)
    batch, dictionaries = small_batch(splits, config)
    vocab_size = len(build_vocabulary(splits["train"]))
    model = SFNModel(vocab_size, dictionaries, config.model, config.data.image_size, dropout=0.5)
    model.train()
    assert not model.categorizer.training
    assert all(not p.requires_grad for p in model.categorizer.parameters())
    loss = model.loss(batch)
    assert loss is not None and loss.requires_grad
    predictions = model.predict_full(batch)
    assert len(predictions) == 6
    for prediction in predictions:
        assert prediction.answer in dictionaries[prediction.category].answers


def test_if1c_model_predicts_global_answers(splits, config):
    torch.manual_seed(5)
    batch, dictionaries = small_batch(splits, config)
    train = splits["train"]
    global_dictionary = build_global_dictionary(train)
    model = IF1CModel(
        len(build_vocabulary(train)), global_dictionary, config.model, config.data.image_size,
        dictionaries=dictionaries,
    ).eval()
    assert model(batch).shape == (6, len(global_dictionary))
    assert all(answer in global_dictionary.answers for answer in model.predict(batch))
