from models.config import Variant, NetConfig, PRESETS, preset, N_COMMANDS
from models.network import TrajectoryNet, ModelOutput, FeatureExtractor, MotionEncoder, Bottleneck, \
    TrajectoryHead, combine, attention_weights, INPUT_MEAN
from models.loss import heteroscedastic_loss, mse_loss, trajectory_loss, LOG_VAR_CLAMP
from models.persistence import save_model, load_model
from models.training import TrainConfig, TrainResult, Batch, TrainingData, ArrayData, DatasetData, train, \
    evaluate_loss, BEST_CHECKPOINT, LOSS_CURVES_FILE
