"""Benchmark harness for handwritten Bangla digit recognition with fine-tuned CNN backbones."""

__version__ = "0.1.0"
