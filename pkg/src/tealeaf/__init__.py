"""tealeaf: tea leaf disease classification with transfer learning,
adversarial-robustness auditing, Grad-CAM / occlusion explanations, and an
HTTP inference service."""

__version__ = "0.1.0"
