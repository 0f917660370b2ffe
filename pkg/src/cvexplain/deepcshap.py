"""Shapley-value explanations for complex networks in one backward pass.

Per layer, exact contributions split into real/imaginary partials; partials
become multiplier pairs (m_x, m_xbar) in Wirtinger style; a complex chain
rule propagates the pair from the output to the input, where contributions
are reconstructed from the input-minus-reference differences.

The chain rule implemented here is the crossed-conjugate form

    m_yh = m_yg * m_xf + conj(m_ybar_g) * m_xbar_f
    m_ybar_h = m_ybar_g * m_xf + conj(m_yg) * m_xbar_f

which is the one consistent with the conservation identity
sum(phi) == h(y) - phi_0 and with the CR-calculus chain rule; it reduces to
plain Wirtinger backpropagation on linear layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import (
    ComplexConv2d,
    ComplexLinear,
    Flatten,
    MagnitudeMaxPool,
    PointwiseLayer,
)
from .maxshap import maxpool_partials
from .model import Model
from .tensor import as_ctensor

STABILITY_EPS = 1e-6

EXPLAINED_PARTS = ("real", "imag", "complex")


class UnsupportedLayerError(TypeError):
    """A layer kind with no contribution rule."""


@dataclass
class PartialContrib:
    """Split of contributions: phi_r + phi_i equals the total contribution."""

    phi_r: np.ndarray
    phi_i: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.phi_r + self.phi_i


@dataclass
class MultiplierState:
    """The multiplier pair propagated by the chain rule.

    For one layer, m_x/m_xbar are (out, in) matrices; after chaining, vectors
    over the remaining input features. When the explained output is
    real-valued, m_xbar == conj(m_x).
    """

    m_x: np.ndarray
    m_xbar: np.ndarray
    fallback: bool = False


@dataclass
class ContributionMap:
    """Per-feature contributions phi plus the baseline output phi0 = f(reference)."""

    phi: np.ndarray
    phi0: complex
    fallback_used: bool = False


def layer_partials_linear(weight, bias, x, ref) -> PartialContrib:
    """Partial contributions of a linear map, per (output, input) pair.

    phi_r[j, k] = W[j, k] * Re(dx_k), phi_i[j, k] = i * W[j, k] * Im(dx_k);
    the bias is input-independent and contributes only to the baseline.
    """
    weight = as_ctensor(weight)
    dx = as_ctensor(x).ravel() - as_ctensor(ref).ravel()
    return PartialContrib(
        phi_r=weight * dx.real[None, :],
        phi_i=1j * weight * dx.imag[None, :],
    )


def layer_partials_pointwise(g, x, ref) -> PartialContrib:
    """Partial contributions of an elementwise function (single-feature case).

    phi_r = g(Re(x) + i*Im(ref)) - g(ref) and phi_i = g(x) - that midpoint,
    so the pair telescopes to g(x) - g(ref) exactly.
    """
    x = as_ctensor(x)
    ref = as_ctensor(ref)
    mid = g(x.real + 1j * ref.imag)
    return PartialContrib(phi_r=mid - g(ref), phi_i=g(x) - mid)


def partial_multipliers(
    pc: PartialContrib,
    x,
    ref,
    d_re=None,
    d_im=None,
    eps: float = STABILITY_EPS,
) -> MultiplierState:
    """Divide partial contributions by the real/imaginary input differences.

    Where |Re(dx)| or |Im(dx)| falls below eps the quotient is replaced by
    the corresponding derivative of the layer along that axis (d_re/d_im),
    the Wirtinger-style stability fallback.
    """
    dx = as_ctensor(x) - as_ctensor(ref)
    d_re = np.zeros(pc.phi_r.shape, dtype=np.complex128) if d_re is None else as_ctensor(d_re)
    d_im = np.zeros(pc.phi_i.shape, dtype=np.complex128) if d_im is None else as_ctensor(d_im)
    re_ok = np.abs(dx.real) >= eps
    im_ok = np.abs(dx.imag) >= eps
    safe_re = np.where(re_ok, dx.real, 1.0)
    safe_im = np.where(im_ok, dx.imag, 1.0)
    m_r = np.where(re_ok, pc.phi_r / safe_re, np.broadcast_to(d_re, pc.phi_r.shape))
    m_i = np.where(im_ok, pc.phi_i / safe_im, np.broadcast_to(d_im, pc.phi_i.shape))
    return MultiplierState(
        m_x=0.5 * (m_r - 1j * m_i),
        m_xbar=0.5 * (m_r + 1j * m_i),
        fallback=bool(np.any(~re_ok) or np.any(~im_ok)),
    )


def chain_step(upstream: MultiplierState, layer: MultiplierState) -> MultiplierState:
    """Compose multipliers of h = f(g(y)) from f's (upstream, vectors over g's
    outputs) and g's (matrices with shape (outputs, inputs))."""
    if layer.m_x.shape[0] != upstream.m_x.shape[0]:
        raise ValueError(
            f"layer outputs {layer.m_x.shape[0]} do not match upstream features "
            f"{upstream.m_x.shape[0]}"
        )
    return MultiplierState(
        m_x=layer.m_x.T @ upstream.m_x + layer.m_xbar.conj().T @ upstream.m_xbar,
        m_xbar=layer.m_xbar.T @ upstream.m_x + layer.m_x.conj().T @ upstream.m_xbar,
        fallback=upstream.fallback or layer.fallback,
    )


def reconstruct_contributions(m: MultiplierState, y, ref):
    """Turn chained multipliers back into contributions at the feature level."""
    dy = as_ctensor(y) - as_ctensor(ref)
    pc = PartialContrib(
        phi_r=(m.m_x + m.m_xbar) * dy.real,
        phi_i=(m.m_x - m.m_xbar) * 1j * dy.imag,
    )
    return pc.total, pc


def _pointwise_multiplier_matrices(layer: PointwiseLayer, y, yref) -> MultiplierState:
    pc = layer_partials_pointwise(layer.apply, y, yref)
    return partial_multipliers(pc, y, yref, d_re=layer.d_re(y), d_im=layer.d_im(y))


def _diag_chain(upstream: MultiplierState, diag: MultiplierState) -> MultiplierState:
    # chain_step specialized to an elementwise layer (diagonal matrices)
    return MultiplierState(
        m_x=diag.m_x * upstream.m_x + np.conj(diag.m_xbar) * upstream.m_xbar,
        m_xbar=diag.m_xbar * upstream.m_x + np.conj(diag.m_x) * upstream.m_xbar,
        fallback=upstream.fallback or diag.fallback,
    )


def _multiplier_step(layer, upstream: MultiplierState, y, yref) -> MultiplierState:
    """Pull the multiplier pair back through one layer."""
    if isinstance(layer, ComplexLinear):
        w = layer.weight
        return MultiplierState(
            m_x=w.T @ upstream.m_x,
            m_xbar=w.conj().T @ upstream.m_xbar,
            fallback=upstream.fallback,
        )
    if isinstance(layer, ComplexConv2d):
        a, _, _ = layer.as_matrix(y.shape)
        return MultiplierState(
            m_x=(a.T @ upstream.m_x.ravel()).reshape(y.shape),
            m_xbar=(a.conj().T @ upstream.m_xbar.ravel()).reshape(y.shape),
            fallback=upstream.fallback,
        )
    if isinstance(layer, Flatten):
        return MultiplierState(
            m_x=upstream.m_x.reshape(y.shape),
            m_xbar=upstream.m_xbar.reshape(y.shape),
            fallback=upstream.fallback,
        )
    if isinstance(layer, PointwiseLayer):
        diag = _pointwise_multiplier_matrices(layer, y, yref)
        return _diag_chain(upstream, diag)
    if isinstance(layer, MagnitudeMaxPool):
        return _maxpool_multiplier_step(layer, upstream, y, yref)
    raise UnsupportedLayerError(f"no contribution rule for layer kind {layer.kind!r}")


def _maxpool_multiplier_step(layer: MagnitudeMaxPool, upstream, y, yref) -> MultiplierState:
    yf = y.ravel()
    rf = yref.ravel()
    mx_up = upstream.m_x.ravel()
    mxb_up = upstream.m_xbar.ravel()
    m_y = np.zeros(yf.shape, dtype=np.complex128)
    m_yb = np.zeros(yf.shape, dtype=np.complex128)
    fallback = upstream.fallback
    for oidx, idxs in layer.iter_windows(y.shape):
        xw = yf[idxs]
        yw = rf[idxs]
        phi_r, phi_i = maxpool_partials(xw, yw)
        am = int(np.argmax(np.abs(xw)))
        pick = np.zeros(xw.size, dtype=np.complex128)
        pick[am] = 1.0
        diag = partial_multipliers(
            PartialContrib(phi_r=phi_r, phi_i=phi_i), xw, yw, d_re=pick, d_im=1j * pick
        )
        fallback = fallback or diag.fallback
        m_y[idxs] += diag.m_x * mx_up[oidx] + np.conj(diag.m_xbar) * mxb_up[oidx]
        m_yb[idxs] += diag.m_xbar * mx_up[oidx] + np.conj(diag.m_x) * mxb_up[oidx]
    return MultiplierState(
        m_x=m_y.reshape(y.shape), m_xbar=m_yb.reshape(y.shape), fallback=fallback
    )


def _part_seed(model: Model, output_index: int, part: str) -> MultiplierState:
    n = model.n_outputs
    if not 0 <= output_index < n:
        raise IndexError(f"output index {output_index} out of range for {n} outputs")
    e = np.zeros(model.output_shape, dtype=np.complex128)
    e.ravel()[output_index] = 1.0
    if part == "real":
        return MultiplierState(m_x=0.5 * e, m_xbar=0.5 * e)
    if part == "imag":
        return MultiplierState(m_x=-0.5j * e, m_xbar=0.5j * e)
    raise ValueError(f"unknown explained part {part!r}")


def input_multipliers(
    model: Model, x, reference, output_index: int = 0, part: str = "real"
) -> MultiplierState:
    """Multiplier pair of the selected output part w.r.t. every input feature."""
    x = as_ctensor(x)
    reference = as_ctensor(reference)
    trace_x = model.forward(x)
    trace_r = model.forward(reference)
    state = _part_seed(model, output_index, part)
    for k in reversed(range(len(model.layers))):
        state = _multiplier_step(
            model.layers[k], state, trace_x.activations[k], trace_r.activations[k]
        )
    return state


def _explain_single_part(model, x, references, output_index, part) -> ContributionMap:
    phis = []
    phi0s = []
    fallback = False
    for ref in references:
        ref = as_ctensor(ref)
        if ref.shape != model.input_shape:
            raise ValueError(
                f"reference shape {ref.shape} does not match model input {model.input_shape}"
            )
        state = input_multipliers(model, x, ref, output_index, part)
        phi, _ = reconstruct_contributions(state, x, ref)
        out_ref = model(ref).ravel()[output_index]
        phis.append(phi)
        phi0s.append(out_ref.real if part == "real" else out_ref.imag)
        fallback = fallback or state.fallback
    return ContributionMap(
        phi=np.mean(phis, axis=0),
        phi0=complex(np.mean(phi0s)),
        fallback_used=fallback,
    )


def explain_deepcshap(
    model: Model,
    x,
    references,
    output_index: int = 0,
    part: str = "real",
) -> ContributionMap:
    """Contribution map for one output of the model, averaged over references.

    part selects the explained quantity: the real part of the output (the
    output itself for real-output models), the imaginary part, or the full
    complex output (computed as the real and imaginary explanations combined).
    """
    if part not in EXPLAINED_PARTS:
        raise ValueError(f"unknown explained part {part!r}")
    x = as_ctensor(x)
    references = list(references)
    if not references:
        raise ValueError("need at least one reference")
    if part == "complex":
        cm_r = _explain_single_part(model, x, references, output_index, "real")
        cm_i = _explain_single_part(model, x, references, output_index, "imag")
        return ContributionMap(
            phi=cm_r.phi + 1j * cm_i.phi,
            phi0=cm_r.phi0.real + 1j * cm_i.phi0.real,
            fallback_used=cm_r.fallback_used or cm_i.fallback_used,
        )
    return _explain_single_part(model, x, references, output_index, part)
