from dwgf.utils.metrics import ensemble_stats, psnr
from dwgf.utils.oracles import GaussianDist, conjugate_posterior, gaussian_kl, map_point, weighted_kl

__all__ = ["GaussianDist", "conjugate_posterior", "ensemble_stats", "gaussian_kl", "map_point", "psnr", "weighted_kl"]
