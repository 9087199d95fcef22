"""Spatiotemporal quality network: autodiff core, layers, assembly, training."""

from .layers import (
    Conv3dLayer,
    InceptionBlock,
    LayerNorm,
    Linear,
    MultiHeadSelfAttention,
    SqueezeExcite,
    TransformerLayer,
    channel_attention,
    positional_encoding,
)
from .network import (
    CUBE,
    GLOBAL,
    SUBSEQ,
    CubeNet,
    FeatureTensor,
    NetworkConfig,
    Regressor,
    STFEEModel,
    cube_to_input,
    desk_config,
    encode_and_regress,
    extract_cube_features,
    load_checkpoint,
    paper_config,
    pool_subsequence,
    save_checkpoint,
    tiny_config,
)
from .tensor import (
    Tensor,
    concat,
    conv3d,
    conv3d_forward,
    layer_norm,
    matmul,
    maxpool3d,
    no_grad,
    softmax,
    stack,
)
from .training import (
    Adam,
    SGD,
    TrainConfig,
    cubes_with_labels,
    loss_cube,
    loss_video,
    predict_video_quality,
    train_stage1,
    train_stage2,
    train_two_stage,
)

__all__ = [
    "Adam",
    "CUBE",
    "Conv3dLayer",
    "CubeNet",
    "FeatureTensor",
    "GLOBAL",
    "InceptionBlock",
    "LayerNorm",
    "Linear",
    "MultiHeadSelfAttention",
    "NetworkConfig",
    "Regressor",
    "SGD",
    "STFEEModel",
    "SUBSEQ",
    "SqueezeExcite",
    "Tensor",
    "TrainConfig",
    "TransformerLayer",
    "channel_attention",
    "concat",
    "conv3d",
    "conv3d_forward",
    "cube_to_input",
    "cubes_with_labels",
    "desk_config",
    "encode_and_regress",
    "extract_cube_features",
    "layer_norm",
    "load_checkpoint",
    "loss_cube",
    "loss_video",
    "matmul",
    "maxpool3d",
    "no_grad",
    "paper_config",
    "pool_subsequence",
    "positional_encoding",
    "predict_video_quality",
    "save_checkpoint",
    "softmax",
    "stack",
    "tiny_config",
    "train_stage1",
    "train_stage2",
    "train_two_stage",
]
