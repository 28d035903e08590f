"""Analytic gradients of every network block against finite differences, in float64."""

import pytest
import torch
import torch.nn.functional as F
from torch.autograd import gradcheck

from sfn_vqa.data.text import PAD_INDEX
from sfn_vqa.data.types import CategoryLabel
from sfn_vqa.models import (
    FusedRepresentation,
    FusionStage,
    ImageEncoder,
    QuestionCategorizer,
    QuestionDrivenAttention,
    QuestionEncoder,
    SFNReasoner,
    SizeEncoder,
    SupportNetwork,
    TwoLayerClassifier,
)

SEEDS = range(10)
STEP = 1e-7
COUNTS = {
    CategoryLabel.MODALITY: 3,
    CategoryLabel.PLANE: 4,
    CategoryLabel.ORGAN: 2,
    CategoryLabel.ABNORMALITY: 5,
    CategoryLabel.BINARY: 2,
}


def padded_questions():
    tokens = torch.randint(2, 9, (3, 4))
    lengths = torch.tensor([4, 2, 3])
    tokens[1, 2:] = PAD_INDEX
    tokens[2, 3] = PAD_INDEX
    return tokens, lengths


def reasoner_outputs(reasoner, vector):
    logits, facts = reasoner(FusedRepresentation(vector, FusionStage.II))
    return torch.cat([logits[c] for c in CategoryLabel] + [facts.modality, facts.plane, facts.organ], dim=1)


# ============================================================================
# PARAMETER GRADIENTS
# ============================================================================

def question_encoder_case():
    encoder = QuestionEncoder(vocab_size=9, embedding_dim=4, hidden_dim=5).double()
    tokens, lengths = padded_questions()
    projection = torch.randn(3, 5, dtype=torch.float64)
    return encoder, lambda: (encoder(tokens, lengths) * projection).sum()


def categorizer_case():
    categorizer = QuestionCategorizer(vocab_size=9, embedding_dim=4, hidden_dim=5, fc_dim=6).double()
    tokens, lengths = padded_questions()
    targets = torch.randint(0, 5, (3,))
    return categorizer, lambda: F.cross_entropy(categorizer(tokens, lengths), targets)


def size_encoder_case():
    encoder = SizeEncoder(output_dim=4).double()
    sizes = torch.rand(3, 2, dtype=torch.float64) * 1000 + 16
    projection = torch.randn(3, 4, dtype=torch.float64)
    return encoder, lambda: (encoder(sizes) * projection).sum()


def attention_case():
    attention = QuestionDrivenAttention(feature_channels=3, question_dim=2, glimpses=2).double()
    q, features = torch.randn(2, 2, dtype=torch.float64), torch.randn(2, 3, 2, 2, dtype=torch.float64)
    projection = torch.randn(2, attention.output_dim, dtype=torch.float64)
    return attention, lambda: (attention(q, features).vector * projection).sum()


def classifier_case():
    head = TwoLayerClassifier(in_dim=4, hidden_dim=8, n_classes=6).double().eval()
    x, targets = torch.randn(5, 4, dtype=torch.float64), torch.randint(0, 6, (5,))
    return head, lambda: F.cross_entropy(head(x), targets)


def support_network_case():
    network = SupportNetwork(in_dim=5, hidden_dim=7, support_dim=3, n_classes=4).double().eval()
    x, targets = torch.randn(4, 5, dtype=torch.float64), torch.randint(0, 4, (4,))
    projection = torch.randn(4, 3, dtype=torch.float64)

    def loss():
        fact, logits = network(x)
        return F.cross_entropy(logits, targets) + (fact * projection).sum()

    return network, loss


def reasoner_case():
    reasoner = SFNReasoner(6, COUNTS, classifier_dim=8, support_dim=3).double().eval()
    vector = torch.randn(4, 6, dtype=torch.float64)
    targets = {c: torch.randint(0, n, (4,)) for c, n in COUNTS.items()}

    def loss():
        logits, _ = reasoner(FusedRepresentation(vector, FusionStage.II))
        return sum(F.cross_entropy(logits[c], targets[c]) for c in CategoryLabel)

    return reasoner, loss


CASES = {
    "question_encoder": question_encoder_case,
    "categorizer": categorizer_case,
    "size_encoder": size_encoder_case,
    "attention": attention_case,
    "classifier": classifier_case,
    "support_network": support_network_case,
    "reasoner": reasoner_case,
}


def directional_gap(module, loss_fn, seed):
    """Relative gap between autograd and a central difference along a random parameter direction."""
    parameters = [p for p in module.parameters() if p.requires_grad]
    module.zero_grad()
    loss_fn().backward()
    generator = torch.Generator().manual_seed(seed)
    directions = [torch.randn(p.shape, generator=generator, dtype=p.dtype) for p in parameters]
    analytic = sum(float((p.grad * d).sum()) for p, d in zip(parameters, directions))
    with torch.no_grad():
        for p, d in zip(parameters, directions):
            p.add_(STEP * d)
        plus = float(loss_fn())
        for p, d in zip(parameters, directions):
            p.sub_(2 * STEP * d)
        minus = float(loss_fn())
        for p, d in zip(parameters, directions):
            p.add_(STEP * d)
    numeric = (plus - minus) / (2 * STEP)
    return abs(analytic - numeric) / max(1.0, abs(numeric))


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("block", sorted(CASES))
def test_parameter_gradients_match_finite_differences(block, seed):
    torch.manual_seed(seed)
    module, loss_fn = CASES[block]()
    assert directional_gap(module, loss_fn, seed) < 1e-4


# ============================================================================
# INPUT GRADIENTS
# ============================================================================

@pytest.mark.parametrize("seed", SEEDS)
def test_attention_input_gradients(seed):
    torch.manual_seed(seed)
    attention = QuestionDrivenAttention(feature_channels=3, question_dim=2, glimpses=2).double()
    q = torch.randn(2, 2, dtype=torch.float64, requires_grad=True)
    features = torch.randn(2, 3, 2, 2, dtype=torch.float64, requires_grad=True)
    assert gradcheck(lambda a, b: attention(a, b).vector, (q, features))


@pytest.mark.parametrize("seed", SEEDS)
def test_size_encoder_input_gradients(seed):
    torch.manual_seed(seed)
    encoder = SizeEncoder(output_dim=4).double()
    sizes = (torch.rand(3, 2, dtype=torch.float64) * 1000 + 16).requires_grad_(True)
    assert gradcheck(encoder, (sizes,))


@pytest.mark.parametrize("seed", SEEDS)
def test_image_encoder_input_gradients(seed):
    torch.manual_seed(seed)
    encoder = ImageEncoder("small", image_size=32).double()
    images = torch.randn(1, 3, 32, 32, dtype=torch.float64, requires_grad=True)
    assert gradcheck(encoder, (images,), eps=1e-7, fast_mode=True)


@pytest.mark.parametrize("seed", SEEDS)
def test_classifier_input_gradients(seed):
    torch.manual_seed(seed)
    head = TwoLayerClassifier(in_dim=4, hidden_dim=8, n_classes=6).double().eval()
    x = torch.randn(5, 4, dtype=torch.float64, requires_grad=True)
    assert gradcheck(head, (x,))


@pytest.mark.parametrize("seed", SEEDS)
def test_support_network_input_gradients(seed):
    torch.manual_seed(seed)
    network = SupportNetwork(in_dim=5, hidden_dim=7, support_dim=3, n_classes=4).double().eval()
    x = torch.randn(4, 5, dtype=torch.float64, requires_grad=True)
    assert gradcheck(network, (x,))


@pytest.mark.parametrize("facts", [True, False])
@pytest.mark.parametrize("seed", SEEDS)
def test_reasoner_input_gradients(seed, facts):
    torch.manual_seed(seed)
    reasoner = SFNReasoner(6, COUNTS, classifier_dim=8, support_dim=3, facts=facts).double().eval()
    vector = torch.randn(4, 6, dtype=torch.float64, requires_grad=True)
    assert gradcheck(lambda v: reasoner_outputs(reasoner, v), (vector,))
