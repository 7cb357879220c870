"""Closed-form examples: exact solutions, derivatives and source terms.

Examples 1 and 2 use u = (sin(pi x) sin(pi y))^2 on the unit square and on the
L-shape (0, 2)^2 minus [1, 2]^2; u and its gradient vanish on both
boundaries. Example 3 drives the problem with f = 2 pi^2 sin(pi x) sin(pi y)
and measures against the eps = 0 solution sin(pi x) sin(pi y), which develops
a boundary layer as eps shrinks.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from ..core.exceptions import ValidationError
from ..fem.mesh import DomainKind

PI = np.pi
Array = np.ndarray


@dataclass(frozen=True)
class ExampleSpec:
    """Reference function with derivatives and the split source f = eps^2 f4 + f2."""

    id: int
    domain: DomainKind
    description: str
    u: Callable[[Array, Array], Array]
    grad_u: Callable[[Array, Array], Tuple[Array, Array]]
    hess_u: Callable[[Array, Array], Tuple[Array, Array, Array]]
    f4: Callable[[Array, Array], Array]
    f2: Callable[[Array, Array], Array]
    reference_is_exact: bool = True

    def value(self, x, y) -> Array:
        return self.u(np.asarray(x, float), np.asarray(y, float))

    def gradient(self, x, y) -> Tuple[Array, Array]:
        return self.grad_u(np.asarray(x, float), np.asarray(y, float))

    def hessian(self, x, y) -> Tuple[Array, Array, Array]:
        return self.hess_u(np.asarray(x, float), np.asarray(y, float))

    def source(self, eps: float) -> Callable[[Array, Array], Array]:
        def f(x, y):
            return eps * eps * self.f4(x, y) + self.f2(x, y)
        return f


# u = (1 - a)(1 - b) / 4 with a = cos(2 pi x), b = cos(2 pi y)

def _bump(x, y):
    return (np.sin(PI * x) * np.sin(PI * y)) ** 2


def _bump_grad(x, y):
    sy2 = np.sin(PI * y) ** 2
    sx2 = np.sin(PI * x) ** 2
    return PI * np.sin(2 * PI * x) * sy2, PI * sx2 * np.sin(2 * PI * y)


def _bump_hess(x, y):
    sx2 = np.sin(PI * x) ** 2
    sy2 = np.sin(PI * y) ** 2
    hxx = 2 * PI ** 2 * np.cos(2 * PI * x) * sy2
    hyy = 2 * PI ** 2 * sx2 * np.cos(2 * PI * y)
    hxy = PI ** 2 * np.sin(2 * PI * x) * np.sin(2 * PI * y)
    return hxx, hxy, hyy


def _bump_bilaplacian(x, y):
    a = np.cos(2 * PI * x)
    b = np.cos(2 * PI * y)
    return 4 * PI ** 4 * (4 * a * b - a - b)


def _bump_minus_laplacian(x, y):
    a = np.cos(2 * PI * x)
    b = np.cos(2 * PI * y)
    return -PI ** 2 * (a + b - 2 * a * b)


def _sine(x, y):
    return np.sin(PI * x) * np.sin(PI * y)


def _sine_grad(x, y):
    return PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y)


def _sine_hess(x, y):
    s = np.sin(PI * x) * np.sin(PI * y)
    return -PI ** 2 * s, PI ** 2 * np.cos(PI * x) * np.cos(PI * y), -PI ** 2 * s


def _zero(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def _sine_source(x, y):
    return 2 * PI ** 2 * np.sin(PI * x) * np.sin(PI * y)


EXAMPLES: Dict[int, ExampleSpec] = {
    1: ExampleSpec(1, DomainKind.SQUARE, "(sin pi x sin pi y)^2 on the unit square",
                   _bump, _bump_grad, _bump_hess, _bump_bilaplacian, _bump_minus_laplacian),
    2: ExampleSpec(2, DomainKind.LSHAPE, "(sin pi x sin pi y)^2 on the L-shape",
                   _bump, _bump_grad, _bump_hess, _bump_bilaplacian, _bump_minus_laplacian),
    3: ExampleSpec(3, DomainKind.SQUARE, "boundary layer, reference sin pi x sin pi y",
                   _sine, _sine_grad, _sine_hess, _zero, _sine_source, reference_is_exact=False),
}


def get_example(example_id: int) -> ExampleSpec:
    try:
        return EXAMPLES[int(example_id)]
    except (KeyError, ValueError):
        raise ValidationError(f"Unknown example {example_id}", field="example", value=example_id)
