"""Single-neuron stealth attacks, adversarial-example bounds and their Monte Carlo checks."""

from stealth_attacks.activations import ActivationKind
from stealth_attacks.adversarial import AdversarialQuery, SmacRegion
from stealth_attacks.backbone import BallClassifier, ClassifierMap, DenseNetwork
from stealth_attacks.geometry import BallSpec
from stealth_attacks.stealth import AttackParams, AttackSpec, ValidationSet

__all__ = [
    "ActivationKind",
    "AdversarialQuery",
    "AttackParams",
    "AttackSpec",
    "BallClassifier",
    "BallSpec",
    "ClassifierMap",
    "DenseNetwork",
    "SmacRegion",
    "ValidationSet",
]

__version__ = "0.1.0"
