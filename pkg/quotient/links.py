from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import expit, log_expit, ndtr, log_ndtr

from quotient.common import InvalidInputException


class LinkFunction(BaseModel):
    """
    Inverse link g mapping the link-scale effect alpha - D_ij to an edge probability.

    logistic: g(0) = 1/2; probit: g(0) = 1/2; custom: any nondecreasing
    callable into (0, 1), with g(0) whatever the callable returns.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: Literal["logistic", "probit", "custom"] = "logistic"
    function: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @model_validator(mode="after")
    def check_custom(self):
        if self.kind == "custom" and self.function is None:
            raise ValueError("custom links need a function")
        return self

    def __call__(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        if self.kind == "logistic":
            return expit(eta)
        if self.kind == "probit":
            return ndtr(eta)
        return np.asarray(self.function(eta), dtype=float)

    def log_prob(self, eta) -> np.ndarray:
        """log g(eta), stable in both tails for the built-in links."""
        eta = np.asarray(eta, dtype=float)
        if self.kind == "logistic":
            return log_expit(eta)
        if self.kind == "probit":
            return log_ndtr(eta)
        with np.errstate(divide="ignore"):
            return np.log(self(eta))

    def log_one_minus(self, eta) -> np.ndarray:
        """log(1 - g(eta))."""
        eta = np.asarray(eta, dtype=float)
        if self.kind == "logistic":
            return log_expit(-eta)
        if self.kind == "probit":
            return log_ndtr(-eta)
        with np.errstate(divide="ignore"):
            return np.log1p(-self(eta))


def get_link(name: Optional[str]) -> Optional[LinkFunction]:
    if name is None:
        return None
    if name not in ("logistic", "probit"):
        raise InvalidInputException(f"Unknown link: {name}. Must be logistic or probit.")
    return LinkFunction(kind=name)
