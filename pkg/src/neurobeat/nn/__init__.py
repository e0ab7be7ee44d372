from .adam import AdamState, adam_step
from .model import (
    ARCHS,
    FCN,
    GRU,
    ArchSpec,
    Params,
    bce_with_logits,
    compute_gradients,
    fcn_forward,
    forward_logits,
    gru_forward,
    init_params,
    loss_and_gradient,
    sigmoid,
)
from .checkpoint import (
    ActivationCurve,
    ModelCheckpoint,
    load_activation,
    load_checkpoint,
    save_activation,
    save_checkpoint,
)
from .training import (
    CvDataset,
    FoldResult,
    TrainConfig,
    build_windows,
    cross_validate,
    predict_activation,
    train_fold,
)
