from quotient.common import (
    CalibrationException,
    FileFormatException,
    InvalidInputException,
    NumericalException,
    QuotientException,
    RankDeficiencyException,
)
from quotient.frechet import credible_radius, frechet_mean, frechet_variation, procrustes_mean, quotient_medoid
from quotient.links import LinkFunction
from quotient.models import DrawSet, FrechetConfig, FrechetResult, SamplerConfig, SimulationSpec

__all__ = [
    'QuotientException',
    'InvalidInputException',
    'NumericalException',
    'RankDeficiencyException',
    'CalibrationException',
    'FileFormatException',
    'DrawSet',
    'FrechetConfig',
    'FrechetResult',
    'SamplerConfig',
    'SimulationSpec',
    'LinkFunction',
    'frechet_mean',
    'frechet_variation',
    'credible_radius',
    'quotient_medoid',
    'procrustes_mean',
]
