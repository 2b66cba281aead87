from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_function, gradient_check
from .losses import cross_entropy, cross_entropy_loss, loss_weights, weighted_loss
from .model import (CnnDescriptor, Model, build_cnn, coordinate_embedding, count_parameters,
                    expand_input_channels, init_extra_band_weights, rescale_location)
from .optim import Adam, ReduceLROnPlateau
from .tensor import Tensor
from .training import Dataset, TrainConfig, evaluate_loss, predict, train, write_train_log
