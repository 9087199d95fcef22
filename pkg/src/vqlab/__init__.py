"""vqlab: compressed-video quality laboratory.

Semi-automatic MOS labeling via quality-decay laws, classical fidelity
metrics (PSNR/SSIM/MS-SSIM, SI/TI), a from-scratch spatiotemporal quality
network with two-stage training, and content-disjoint evaluation protocols.
"""

from . import cli, content, fidelity, harness, labeling, preprocess, stnet, vio

__version__ = "0.1.0"

__all__ = [
    "cli",
    "content",
    "fidelity",
    "harness",
    "labeling",
    "preprocess",
    "stnet",
    "vio",
    "__version__",
]
