"""Half-sphere mean transform, the paraboloid convolution it conjugates to, and their inversions."""
from .grid import (Bump, Field, GridError, GridSpec, OutOfDomainError, Phantom, evaluate_phantom,
                   inner_product, interpolate, sample_phantom, zeros)
from .intertwine import map_L, map_L_inv, map_M, map_M_inv, map_N, map_N_inv, sphere_area
from .inversion import (invert_P_backprojection, invert_S, invert_S_2d, invert_S_3d,
                        invert_S_conjugation, k_y)
from .operators import parab_adjoint, parab_forward, sphere_means_adjoint, sphere_means_forward
from .radon import (GeneralPositionError, Sinogram, invert_P_radon, qp_forward, qp_invert,
                    radon_adjoint, radon_forward, radon_invert)
from .spectral import (SingularFrequencyError, SpectralField, fft_forward, fft_inverse, hilbert_y,
                       invert_P_fourier, lambda_y, that_multiplier)

__all__ = [name for name in dir() if not name.startswith("_")]
