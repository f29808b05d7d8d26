"""Per-particle drifts: u for the data term, v for the diffusion-weighted KL to the prior."""
import logging
from typing import Optional, Tuple, Union

import torch
from torch import Tensor

from dwgf.errors import DegenerateKernelError, NumericError
from dwgf.flow.ensemble import ParticleEnsemble, as_centers, kde_score, log_kde
from dwgf.modules.autoencoder import LinearAutoencoder
from dwgf.modules.observation import ObservationModel
from dwgf.modules.prior import GaussianMixture
from dwgf.modules.schedule import Schedule

pylogger = logging.getLogger(__name__)


def _raise_if_not_finite(values: Tensor, what: str) -> None:
    finite = torch.isfinite(values)
    if finite.all():
        return

    rows = ~finite.reshape(-1, values.shape[-1]).all(dim=-1)
    particle = int(torch.nonzero(rows)[0].item()) if values.dim() > 1 else None
    raise NumericError(f"Non-finite {what}", particle=particle)


def data_drift(
    ae: LinearAutoencoder,
    model: Optional[ObservationModel],
    z: Tensor,
    eps: Tensor,
    lam: float,
) -> Tensor:
    """u(z) = (-lam * (D(E(x)) - x) / rho^2 - grad log p(y | x)) dD/dz at x = D(z) + rho * eps."""
    _raise_if_not_finite(z, "latent position")

    x0 = ae.decode(z, eps)
    cotangent = -lam * ae.data_score_approx(x0)
    if model is not None:
        cotangent = cotangent - model.likelihood_grad(x0)
    _raise_if_not_finite(cotangent, "pixel-space drift")

    return ae.decoder_vjp(z, cotangent)


def data_objective(
    ae: LinearAutoencoder,
    model: Optional[ObservationModel],
    z: Tensor,
    eps: Tensor,
    lam: float,
) -> Tuple[Tensor, Tensor]:
    # likelihood and consistency terms; the projection D(E(x)) is a constant target
    x0 = ae.decode(z, eps)
    target = ae.decode(ae.encode(x0)).detach()
    consistency = 0.5 * lam * ((x0 - target) ** 2).sum(dim=-1) / ae.rho**2
    likelihood = -model.log_likelihood(x0) if model is not None else torch.zeros_like(consistency)
    return likelihood, consistency


def reg_drift(
    ensemble: Union[ParticleEnsemble, Tensor],
    prior: GaussianMixture,
    sched: Schedule,
    s: int,
    nu: Tensor,
    c: float,
    index: Optional[int] = None,
) -> Tensor:
    """v(z) = w(s) (grad log KDE_s(z_s) - score_s(z_s)) alpha_s at z_s = alpha_s z_0 + sigma_s nu.

    With `index` only that particle is moved (`nu` of shape (d,)); the KDE always uses the whole snapshot.
    """
    centers = as_centers(ensemble)
    alpha, sigma = sched.alpha_sigma(s)
    if sigma == 0.0:
        raise DegenerateKernelError(f"The regularization drift is undefined at s={s}")

    z0 = centers if index is None else centers[index]
    zs = sched.diffuse(z0, s, nu)

    score_gap = kde_score(centers, sched, s, zs) - prior.score_at_time(sched, s, zs)
    v = sched.weight(s, c) * alpha * score_gap
    _raise_if_not_finite(v, "regularization drift")

    return v


def reg_objective(
    ensemble: Union[ParticleEnsemble, Tensor],
    prior: GaussianMixture,
    sched: Schedule,
    s: int,
    nu: Tensor,
    c: float,
) -> Tensor:
    centers = as_centers(ensemble)
    zs = sched.diffuse(centers, s, nu)
    return sched.weight(s, c) * (log_kde(centers, sched, s, zs) - prior.log_density_at_time(sched, s, zs))
