from dwgf.modules.autoencoder import LinearAutoencoder, exact_encoder, pseudo_inverse_encoder, random_decoder_weight
from dwgf.modules.observation import ForwardOperator, ObservationModel, OperatorKind, observe
from dwgf.modules.prior import GaussianMixture
from dwgf.modules.schedule import Schedule

__all__ = [
    "ForwardOperator",
    "GaussianMixture",
    "LinearAutoencoder",
    "ObservationModel",
    "OperatorKind",
    "Schedule",
    "exact_encoder",
    "observe",
    "pseudo_inverse_encoder",
    "random_decoder_weight",
]
