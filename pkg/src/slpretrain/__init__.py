"""Pose-based sign language pre-training: masked pose modeling combined with
fine-grained sign-text contrastive learning, plus the downstream pipelines
and metrics used to evaluate the encoder."""

__version__ = "0.1.0"
