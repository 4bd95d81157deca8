from nn.tensor import Tensor, apply_op, as_tensor, set_default_dtype, get_default_dtype
from nn import ops
from nn.layers import Module, ModuleList, Linear, Conv2d, MLP, LSTM, LSTMLayer, lstm_step, lstm_forward, \
    init_parameters, parameter, FORGET_BIAS
from nn.optim import AdamState, adam_step
from nn.gradcheck import grad_check, run_grad_checks, LINEAR_TOLERANCE, NONLINEAR_TOLERANCE
from nn.checkpoint import save_checkpoint, load_checkpoint, read_header, CHECKPOINT_FORMAT_VERSION
