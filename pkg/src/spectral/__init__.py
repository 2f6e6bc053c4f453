from .envelope import Envelope, SpectralConstants, matrix_exp, envelope, spectral_constants
