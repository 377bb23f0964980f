"""Deep ReLU networks with connections from all earlier layers.

A network's layer l reads the concatenation of the input and every
previous layer's output; hidden units apply sigma(t) = max(t, 0) and the
final layer is affine.  Rows store only their nonzero (column, weight)
entries in ascending column order, and evaluation accumulates each row
strictly left to right, adding the bias last.  That fixed order is
load-bearing: the compiled networks below are arranged so that whenever
an input leaves a gadget's support, or a product factor is exactly zero,
the running sums cancel in adjacent pairs and the output is the
floating-point zero, not merely a small number.

Contents: the saturation gadgets phi0 (plateau) and phi1 (clipped
identity), approximate product networks built from a pairwise squaring
identity with piecewise-linear refinement chains, network algebra
(parallelize / concatenate) with explicit size and depth accounting,
the compiler turning Lagrange monomial tables into per-triple networks,
and the accuracy parameter delta derived from a collocation plan.
"""

import itertools
import json
import math

import numpy as np
from scipy.special import logsumexp

from .hermite import NodeFamily
from .indices import p_weight
from .lagrange import lagrange_coeffs

# Width*cols threshold below which a layer serializes as a dense
# row-major block; larger layers use the sparse entries form.
_DENSE_CELL_LIMIT = 4096

# Pointwise certificates below float64 evaluation noise are unverifiable;
# delta is floored here and both values are reported.
DELTA_FLOOR = 1e-12


class _Layer:
    """One layer: per-unit sparse rows over all earlier columns."""

    __slots__ = ("rows", "bias", "_prog")

    def __init__(self, rows, bias):
        self.rows = rows          # list of (cols int64 asc, weights float64)
        self.bias = np.asarray(bias, dtype=float)
        self._prog = None

    @property
    def width(self):
        return len(self.rows)

    def program(self):
        """Rows bucketed by entry count for vectorized evaluation.

        Accumulation order per row is unchanged: position t of every row
        in a bucket is added in the same step, so each row still sums its
        entries left to right with the bias last.
        """
        if self._prog is None:
            buckets = {}
            for r, (cols, wts) in enumerate(self.rows):
                buckets.setdefault(len(cols), []).append(r)
            prog = []
            for nnz in sorted(buckets):
                ridx = np.array(buckets[nnz], dtype=np.intp)
                if nnz == 0:
                    prog.append((ridx, None, None))
                    continue
                C = np.stack([self.rows[r][0] for r in buckets[nnz]])
                W = np.stack([self.rows[r][1] for r in buckets[nnz]])
                prog.append((ridx, C, W))
            self._prog = prog
        return self._prog


class ReluNetwork:
    """Feedforward ReLU network whose layers may read all earlier layers.

    The last layer is affine (no activation).  A one-layer network is
    just its affine map.  W counts nonzero weights and biases; L is the
    number of layers.
    """

    def __init__(self, input_dim, layers, meta=None):
        if input_dim < 0:
            raise ValueError("input_dim must be >= 0")
        if not layers:
            raise ValueError("a network needs at least its affine layer")
        self.input_dim = int(input_dim)
        self.layers = layers
        self.meta = dict(meta or {})
        cols = self.input_dim
        for li, layer in enumerate(self.layers):
            for c, _ in layer.rows:
                if len(c) and c.max() >= cols:
                    raise ValueError(
                        f"layer {li} references column {c.max()} but only "
                        f"{cols} earlier columns exist")
            cols += layer.width
        self.meta["W"] = self.size
        self.meta["L"] = self.depth

    @property
    def depth(self):
        return len(self.layers)

    @property
    def size(self):
        return recount_size(self)

    @property
    def out_dim(self):
        return self.layers[-1].width

    @property
    def widths(self):
        return [layer.width for layer in self.layers]

    def eval_batch(self, pts):
        """Forward pass at a batch of points, shape (n, input_dim)."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.input_dim:
            raise ValueError(
                f"expected points of shape (n, {self.input_dim}), "
                f"got {pts.shape}")
        n = pts.shape[0]
        hidden = self.layers[:-1]
        total = self.input_dim + sum(layer.width for layer in hidden)
        z = np.empty((total, n))
        z[: self.input_dim] = pts.T
        base = self.input_dim
        for layer in hidden:
            block = _apply_layer(layer, z, n)
            np.maximum(block, 0.0, out=block)
            z[base: base + layer.width] = block
            base += layer.width
        out = _apply_layer(self.layers[-1], z, n)
        return out.T

    def __call__(self, pts):
        return self.eval_batch(pts)


def _apply_layer(layer, z, n):
    pre = np.zeros((layer.width, n))
    for ridx, C, W in layer.program():
        if C is None:
            continue
        acc = W[:, 0:1] * z[C[:, 0]]
        for t in range(1, C.shape[1]):
            acc += W[:, t: t + 1] * z[C[:, t]]
        pre[ridx] = acc
    pre += layer.bias[:, None]
    return pre


def net_eval(net, x):
    """Evaluate one point; returns the output vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise ValueError(f"expected a vector of length {net.input_dim}")
    return net.eval_batch(x[None, :])[0]


def recount_size(net):
    """Recount nonzero weights and biases from the stored rows."""
    total = 0
    for layer in net.layers:
        for _, wts in layer.rows:
            total += int(np.count_nonzero(wts))
        total += int(np.count_nonzero(layer.bias))
    return total


# ---------------------------------------------------------------------------
# construction


class _Unit:
    """Handle to one hidden unit during construction."""

    __slots__ = ("layer", "ordinal")

    def __init__(self, layer, ordinal):
        self.layer = layer
        self.ordinal = ordinal


class _NetBuilder:
    """Collects sigma-units on numbered layers, then emits a network.

    Term lists pair a reference (int = 0-based input coordinate, or a
    _Unit from a strictly earlier layer) with a weight.  At finalize the
    used layers are renumbered contiguously, units get ascending column
    indices in (layer, creation) order, and each row's entries are
    sorted by column — which preserves creation adjacency inside a
    layer, the property the exact-cancellation arguments rely on.
    """

    def __init__(self, input_dim):
        self.input_dim = input_dim
        self.units = []  # (unit, terms, bias)
        self._count = 0

    def unit(self, layer, terms, bias=0.0):
        u = _Unit(int(layer), self._count)
        self._count += 1
        for ref, _ in terms:
            if isinstance(ref, _Unit) and ref.layer >= u.layer:
                raise ValueError("units may only read strictly earlier layers")
        self.units.append((u, list(terms), float(bias)))
        return u

    def finalize(self, outputs, meta=None):
        """Emit the network; `outputs` is a list of (terms, bias) rows."""
        layer_ids = sorted({u.layer for u, _, _ in self.units})
        renumber = {lid: i for i, lid in enumerate(layer_ids)}
        per_layer = [[] for _ in layer_ids]
        for u, terms, bias in self.units:
            per_layer[renumber[u.layer]].append((u, terms, bias))
        col = {}
        next_col = self.input_dim
        for bucket in per_layer:
            bucket.sort(key=lambda rec: rec[0].ordinal)
            for u, _, _ in bucket:
                col[id(u)] = next_col
                next_col += 1

        def resolve(terms):
            entries = []
            for ref, w in terms:
                w = float(w)
                if w == 0.0:
                    continue
                c = ref if not isinstance(ref, _Unit) else col[id(ref)]
                if not isinstance(ref, _Unit) and not 0 <= ref < self.input_dim:
                    raise ValueError(f"input coordinate {ref} out of range")
                entries.append((int(c), w))
            entries.sort(key=lambda e: e[0])
            merged = []
            for c, w in entries:
                if merged and merged[-1][0] == c:
                    merged[-1][1] += w
                else:
                    merged.append([c, w])
            cols = np.array([c for c, w in merged if w != 0.0], dtype=np.int64)
            wts = np.array([w for _, w in merged if w != 0.0], dtype=float)
            return cols, wts

        layers = []
        for bucket in per_layer:
            rows = [resolve(terms) for _, terms, _ in bucket]
            bias = [b for _, _, b in bucket]
            layers.append(_Layer(rows, bias))
        out_rows = [resolve(terms) for terms, _ in outputs]
        out_bias = [b for _, b in outputs]
        layers.append(_Layer(out_rows, out_bias))
        return ReluNetwork(self.input_dim, layers, meta)


def _neg(terms):
    return [(ref, -w) for ref, w in terms]


def identity_net(dim):
    """One affine layer copying the input (W = dim, L = 1)."""
    b = _NetBuilder(dim)
    return b.finalize([([(i, 1.0)], 0.0) for i in range(dim)],
                      meta={"kind": "identity"})


# ---------------------------------------------------------------------------
# gadgets

def _phi1_expr(b, coord, scale, base=1):
    """phi1(scale*y_coord) as a two-column expression.

    phi1(t) = t on [-1,1], linear to 0 at |t|=2, exactly zero beyond:
    phi1(t) = A(t) - A(-t) with A(t) = sigma(t - sigma(2t - 2)).  The
    outer units saturate, so both columns are exact floating-point zeros
    for |t| >= 2 and reproduce t exactly on the plateau.
    """
    l1a = b.unit(base, [(coord, 2.0 * scale)], -2.0)
    l1b = b.unit(base, [(coord, -2.0 * scale)], -2.0)
    ap = b.unit(base + 1, [(coord, scale), (l1a, -1.0)])
    am = b.unit(base + 1, [(coord, -scale), (l1b, -1.0)])
    return [(ap, 1.0), (am, -1.0)]


def _phi0_expr(b, coord, scale, base=1):
    """phi0(scale*y_coord) as a one-column expression.

    phi0(t) = 1 on [-1,1], linear to 0 at |t|=2, exactly zero beyond:
    phi0(t) = sigma(1 - sigma(t-1) - sigma(-t-1)).
    """
    l1a = b.unit(base, [(coord, scale)], -1.0)
    l1b = b.unit(base, [(coord, -scale)], -1.0)
    p = b.unit(base + 1, [(l1a, -1.0), (l1b, -1.0)], 1.0)
    return [(p, 1.0)]


def phi1_net():
    """The clipped-identity gadget as a standalone scalar network."""
    b = _NetBuilder(1)
    expr = _phi1_expr(b, 0, 1.0)
    return b.finalize([(expr, 0.0)], meta={"kind": "phi1"})


def phi0_net():
    """The plateau gadget as a standalone scalar network."""
    b = _NetBuilder(1)
    expr = _phi0_expr(b, 0, 1.0)
    return b.finalize([(expr, 0.0)], meta={"kind": "phi0"})


# ---------------------------------------------------------------------------
# products

def _sawtooth_depth(n_factors, delta):
    """Refinement depth so the pairwise-tree error stays below delta.

    Each pair contributes at most 2^(-2n-2); a tree over d factors has
    d-1 pair nodes.  A 0.1% margin absorbs float accumulation noise.
    """
    eps = 0.999 * delta / max(1, n_factors - 1)
    n = max(1, math.ceil(0.5 * (math.log2(1.0 / eps) - 2.0)))
    while 2.0 ** (-2 * n - 2) > eps:
        n += 1
    return n


def _pair_node(b, left, right, n, base, root):
    """Product of two in-[-1,1] expressions via the squaring identity
    x*y = ((x+y)/2)^2 - ((x-y)/2)^2.

    Both squares share one piecewise-linear refinement chain layout; the
    final combination interleaves the two chains' units so that when the
    chains carry identical values (which happens exactly when a factor
    is zero) the row cancels pairwise to the floating-point zero.  The
    result is clipped back into [-1,1]; non-root nodes are materialized
    as a sigma(v), sigma(-v) pair for the next level.
    """
    upp = b.unit(base, left + right)                    # sigma(+L +R)
    upm = b.unit(base, left + _neg(right))              # sigma(+L -R)
    ump = b.unit(base, _neg(left) + _neg(right))        # sigma(-L -R)
    umm = b.unit(base, _neg(left) + right)              # sigma(-L +R)
    # |L+R|/2 = (upp + ump)/2,  |L-R|/2 = (upm + umm)/2
    ta = [(upp, 0.5), (ump, 0.5)]
    tb = [(upm, 0.5), (umm, 0.5)]
    v = [(upp, 0.5), (upm, -0.5), (ump, 0.5), (umm, -0.5)]
    prev_a, prev_b = ta, tb
    for i in range(1, n + 1):
        lay = base + i
        units = []
        for shift in (0.0, -0.5, -1.0):
            ua = b.unit(lay, prev_a, shift)
            ub = b.unit(lay, prev_b, shift)
            units.append((ua, ub))
        q = 4.0 ** (-i)
        for (ua, ub), w in zip(units, (2.0 * q, -4.0 * q, 2.0 * q)):
            v.append((ua, -w))
            v.append((ub, +w))
        (a1, b1), (a2, b2), (a3, b3) = units
        prev_a = [(a1, 2.0), (a2, -4.0), (a3, 2.0)]
        prev_b = [(b1, 2.0), (b2, -4.0), (b3, 2.0)]
    cl1 = b.unit(base + n + 1, v, -1.0)
    cl2 = b.unit(base + n + 1, _neg(v), -1.0)
    clipped = v + [(cl1, -1.0), (cl2, 1.0)]
    if root:
        return clipped
    up = b.unit(base + n + 2, clipped)
    um = b.unit(base + n + 2, _neg(clipped))
    return [(up, 1.0), (um, -1.0)]


def _product_tree(b, leaves, n, base):
    """Balanced, level-synchronized pairing tree over leaf expressions."""
    level = list(leaves)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(_pair_node(b, level[i], level[i + 1], n, base,
                                  root=(len(level) == 2)))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
        base += n + 3
    return level[0]


def product_net(d, delta):
    """Network approximating x_1*...*x_d on [-1,1]^d within delta.

    The output is exactly zero (bit level) whenever some x_j == 0.
    """
    if d < 2:
        raise ValueError("product networks need d >= 2")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    b = _NetBuilder(d)
    n = _sawtooth_depth(d, delta)
    expr = _product_tree(b, [[(i, 1.0)] for i in range(d)], n, base=1)
    return b.finalize([(expr, 0.0)],
                      meta={"kind": "product", "d": d, "delta": delta,
                            "pair_depth": n})


def _normalize_which(which, d):
    table = {"phi0": "phi0", "phi1": "phi1", 0: "phi0", 1: "phi1"}
    if isinstance(which, (str, int)):
        seq = [which] * d
    else:
        seq = list(which)
        if len(seq) != d:
            raise ValueError("need one gadget selector per coordinate")
    try:
        return [table[w] for w in seq]
    except KeyError as exc:
        raise ValueError(f"unknown gadget selector {exc.args[0]!r}") from None


def truncated_product_net(d, delta, which):
    """Network approximating prod_j phi(x_j) within delta on [-2,2]^d.

    `which` selects the gadget ("phi0" plateau or "phi1" identity) for
    all coordinates, or per coordinate when given as a sequence.  The
    output is exactly zero as soon as any |x_j| >= 2, and for d = 1 the
    network is the gadget itself (error 0).
    """
    if d < 1:
        raise ValueError("need d >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    kinds = _normalize_which(which, d)
    b = _NetBuilder(d)
    expr = _gadget_product_expr(b, list(enumerate(kinds)), 1.0, delta)
    return b.finalize([(expr, 0.0)],
                      meta={"kind": "truncated_product", "d": d,
                            "delta": delta, "which": kinds})


def _gadget_product_expr(b, factors, scale, delta):
    """Expression for prod over (coord, kind) gadget factors.

    Gadgets occupy layers 1-2; the pairing tree starts at layer 3.
    """
    leaves = []
    for coord, kind in factors:
        make = _phi0_expr if kind == "phi0" else _phi1_expr
        leaves.append(make(b, coord, scale, base=1))
    if len(leaves) == 1:
        return leaves[0]
    n = _sawtooth_depth(len(leaves), delta)
    return _product_tree(b, leaves, n, base=3)


# ---------------------------------------------------------------------------
# algebra

def _shift_net(net, offsets, out):
    """Copy net's rows into builder-style layers with reindexed columns.

    offsets[l] maps net's layer l to the target global column base.
    Returns per-layer lists of (cols, wts, bias) for the hidden part and
    the remapped final rows.
    """
    bases = []
    col = net.input_dim
    for layer in net.layers[:-1]:
        bases.append(col)
        col += layer.width

    def remap(cols, wts):
        new = np.empty_like(cols)
        for t, c in enumerate(cols):
            if c < net.input_dim:
                new[t] = c
            else:
                li = 0
                while li + 1 < len(bases) and bases[li + 1] <= c:
                    li += 1
                new[t] = offsets[li] + (c - bases[li])
        order = np.argsort(new, kind="stable")
        return new[order], wts[order]

    for li, layer in enumerate(net.layers[:-1]):
        for (cols, wts), bias in zip(layer.rows, layer.bias):
            c, w = remap(cols, wts)
            out[li].append((c, w, float(bias)))
    final = []
    for (cols, wts), bias in zip(net.layers[-1].rows, net.layers[-1].bias):
        c, w = remap(cols, wts)
        final.append((c, w, float(bias)))
    return final


def _emit(input_dim, hidden, outputs, meta):
    """Assemble a ReluNetwork from explicit per-layer row triples."""
    layers = []
    for rows in hidden:
        layers.append(_Layer([(c, w) for c, w, _ in rows],
                             [b for _, _, b in rows]))
    layers.append(_Layer([(c, w) for c, w, _ in outputs],
                         [b for _, _, b in outputs]))
    return ReluNetwork(input_dim, layers, meta)


def parallelize(nets, coefficients):
    """Weighted sum of networks sharing an input dimension.

    Output = sum_j coefficients[j] * net_j(x).  Depth is the maximum
    member depth; shorter members are padded with identity-carry pairs
    (sigma(t), sigma(-t) per output scalar per missing layer), whose
    cost is counted in W.  meta["raw_W"] records the plain sum of member
    sizes without padding.
    """
    nets = list(nets)
    lam = [float(c) for c in coefficients]
    if not nets:
        raise ValueError("need at least one network")
    if len(lam) != len(nets):
        raise ValueError("need one coefficient per network")
    d0 = nets[0].input_dim
    p0 = nets[0].out_dim
    if any(n.input_dim != d0 for n in nets):
        raise ValueError("input dimensions differ")
    if any(n.out_dim != p0 for n in nets):
        raise ValueError("output dimensions differ")
    depth = max(n.depth for n in nets)
    n_hidden = depth - 1
    hidden = [[] for _ in range(n_hidden)]

    # reserve column layout: per hidden layer, each net's block in order
    # (carry pairs included), so offsets are known before copying rows.
    widths = [[0] * len(nets) for _ in range(n_hidden)]
    for j, net in enumerate(nets):
        for li, layer in enumerate(net.layers[:-1]):
            widths[li][j] = layer.width
        if net.depth < depth:
            for li in range(net.depth - 1, n_hidden):
                widths[li][j] = 2 * p0
    base = d0
    offsets = [[0] * len(nets) for _ in range(n_hidden)]
    for li in range(n_hidden):
        for j in range(len(nets)):
            offsets[li][j] = base
            base += widths[li][j]

    outputs = [[] for _ in range(p0)]
    out_bias = [0.0] * p0
    for j, net in enumerate(nets):
        own = [offsets[li][j] for li in range(net.depth - 1)]
        final = _shift_net(net, own, hidden)
        if net.depth == depth:
            for r, (c, w, bias) in enumerate(final):
                outputs[r].append((c, w * lam[j]))
                out_bias[r] += lam[j] * bias
        else:
            # identity-carry padding: materialize the member's output at
            # its own final depth, then carry the pair upward.
            carry = []
            for r, (c, w, bias) in enumerate(final):
                li = net.depth - 1
                cbase = offsets[li][j]
                hidden[li].append((c, w, bias))
                hidden[li].append((c, -w, -bias))
                carry.append((cbase + 2 * r, cbase + 2 * r + 1))
            for li in range(net.depth, n_hidden):
                cbase = offsets[li][j]
                nxt = []
                for r, (cp, cm) in enumerate(carry):
                    cols = np.array([cp, cm], dtype=np.int64)
                    hidden[li].append((cols, np.array([1.0, -1.0]), 0.0))
                    hidden[li].append((cols, np.array([-1.0, 1.0]), 0.0))
                    nxt.append((cbase + 2 * r, cbase + 2 * r + 1))
                carry = nxt
            for r, (cp, cm) in enumerate(carry):
                outputs[r].append((np.array([cp, cm], dtype=np.int64),
                                   np.array([lam[j], -lam[j]])))

    out_rows = []
    for r in range(p0):
        pieces = sorted(outputs[r], key=lambda piece: piece[0][0] if
                        len(piece[0]) else -1)
        cols = np.concatenate([p[0] for p in pieces]) if pieces else \
            np.array([], dtype=np.int64)
        wts = np.concatenate([p[1] for p in pieces]) if pieces else \
            np.array([])
        keep = wts != 0.0
        out_rows.append((cols[keep], wts[keep], out_bias[r]))
    meta = {"kind": "parallelize", "raw_W": sum(n.size for n in nets)}
    return _emit(d0, hidden, out_rows, meta)


def concatenate(first, second):
    """Functional composition: x -> second(first(x)).

    The interface inserts a sigma(v), sigma(-v) pair per scalar of
    first's output, so W <= 2*W(first) + 2*W(second) and depth adds.
    """
    if second.input_dim != first.out_dim:
        raise ValueError(
            f"second expects {second.input_dim} inputs but first "
            f"produces {first.out_dim}")
    n_hidden = (first.depth - 1) + 1 + (second.depth - 1)
    hidden = [[] for _ in range(n_hidden)]

    base = first.input_dim
    first_offsets = []
    for layer in first.layers[:-1]:
        first_offsets.append(base)
        base += layer.width
    f_final = _shift_net(first, first_offsets, hidden)
    pair_base = base
    pair_layer = first.depth - 1
    for c, w, bias in f_final:
        hidden[pair_layer].append((c, w, bias))
        hidden[pair_layer].append((c, -w, -bias))
    base = pair_base + 2 * first.out_dim

    second_offsets = []
    for layer in second.layers[:-1]:
        second_offsets.append(base)
        base += layer.width

    def remap_second(cols, wts):
        out_c, out_w = [], []
        sbases = []
        col = second.input_dim
        for layer in second.layers[:-1]:
            sbases.append(col)
            col += layer.width
        for c, w in zip(cols, wts):
            if c < second.input_dim:
                out_c.extend([pair_base + 2 * c, pair_base + 2 * c + 1])
                out_w.extend([w, -w])
            else:
                li = 0
                while li + 1 < len(sbases) and sbases[li + 1] <= c:
                    li += 1
                out_c.append(second_offsets[li] + (c - sbases[li]))
                out_w.append(w)
        c_arr = np.array(out_c, dtype=np.int64)
        w_arr = np.array(out_w)
        order = np.argsort(c_arr, kind="stable")
        return c_arr[order], w_arr[order]

    for li, layer in enumerate(second.layers[:-1]):
        for (cols, wts), bias in zip(layer.rows, layer.bias):
            c, w = remap_second(cols, wts)
            hidden[pair_layer + 1 + li].append((c, w, float(bias)))
    outputs = []
    for (cols, wts), bias in zip(second.layers[-1].rows,
                                 second.layers[-1].bias):
        c, w = remap_second(cols, wts)
        outputs.append((c, w, float(bias)))
    return _emit(first.input_dim, hidden, outputs, {"kind": "concatenate"})


# ---------------------------------------------------------------------------
# compilation of collocation triples

def _coeff_source(coeffs):
    if callable(coeffs):
        return coeffs
    table = dict(coeffs) if coeffs is not None else {}

    def source(order):
        basis = table.get(order)
        if basis is None:
            basis = lagrange_coeffs(order)
            table[order] = basis
        return basis

    return source


def assemble_phi_triple(s_minus_e, k, coeffs, omega, delta, *,
                        input_dim=None, gate_coord=1, label=None):
    """Compile one collocation triple into a scalar network.

    The target is the product of univariate cardinal polynomials of
    order (s-e)_j at signed node k_j.  Each monomial term l <= s-e
    becomes a truncated gadget product over the support of s-e (phi1
    repeated l_j times for l_j >= 1, one phi0 plateau factor for
    l_j = 0), fed with y/(4*sqrt(omega)) and rescaled by
    b_l * (4*sqrt(omega))^{|l|_1}; the terms are parallelized.  Every
    support coordinate is gated, so the network is exactly zero as soon
    as any |y_j| > 8*sqrt(omega).  When s-e = 0 the network is a single
    plateau gadget on `gate_coord` with unit coefficient.

    meta["coeff_abs_sum"] records sum_l |b_l| (4*sqrt(omega))^{|l|_1},
    the certificate weight of this triple: the network is within
    delta * coeff_abs_sum of its polynomial on the plateau box.
    """
    if omega < 1:
        raise ValueError("omega must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    source = _coeff_source(coeffs)
    pairs = s_minus_e.pairs
    if len(k) != len(pairs):
        raise ValueError("need one signed node index per support coordinate")
    scale = 4.0 * math.sqrt(omega)
    inv = 1.0 / scale
    coords = [j for j, _ in pairs]
    dim = max([input_dim or 0, max(coords, default=0), gate_coord])
    dim = max(dim, 1)

    if not pairs:
        b = _NetBuilder(dim)
        expr = _phi0_expr(b, gate_coord - 1, inv, base=1)
        net = b.finalize([(expr, 0.0)], meta={
            "kind": "phi_triple", "label": label, "delta": delta,
            "omega": omega, "coeff_abs_sum": 1.0})
        return net

    tables = [np.asarray(source(m).coeffs(kk), dtype=float)
              for (_, m), kk in zip(pairs, k)]
    monos, lams = [], []
    for exps in itertools.product(*(range(m + 1) for _, m in pairs)):
        b_l = 1.0
        for tab, e in zip(tables, exps):
            b_l *= tab[e]
        if b_l == 0.0:
            continue
        monos.append(exps)
        lams.append(b_l * scale ** sum(exps))

    nets = []
    for exps in monos:
        factors = []
        for (j, _), e in zip(pairs, exps):
            if e == 0:
                factors.append((j - 1, "phi0"))
            else:
                factors.extend([(j - 1, "phi1")] * e)
        b = _NetBuilder(dim)
        expr = _gadget_product_expr(b, factors, inv, delta)
        nets.append(b.finalize([(expr, 0.0)]))
    net = parallelize(nets, lams)
    net.meta.update({
        "kind": "phi_triple", "label": label, "delta": delta,
        "omega": omega, "coeff_abs_sum": float(np.sum(np.abs(lams)))})
    return net


class NetworkBundle:
    """Per-triple scalar networks sharing one input dimension.

    The bundle is never merged into one network: W is the sum and L the
    maximum of the members, and the labels list is parallel to the
    networks list.
    """

    def __init__(self, networks, labels, meta=None):
        if len(networks) != len(labels):
            raise ValueError("labels must be parallel to networks")
        dims = {n.input_dim for n in networks}
        if len(dims) > 1:
            raise ValueError("member networks disagree on input dimension")
        self.networks = list(networks)
        self.labels = list(labels)
        self.input_dim = dims.pop() if dims else 0
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.networks)

    @property
    def W(self):
        return sum(n.size for n in self.networks)

    @property
    def L(self):
        return max((n.depth for n in self.networks), default=0)


def assemble_surrogate(plan, samples, delta, omega):
    """Compile a plan into (bundle, evaluator).

    `samples` holds one solution vector per plan triple (or one per
    unique grid point, which is expanded through the triple table).  The
    networks depend only on the triples, never on the samples; the
    evaluator computes  sum_t sign_t * samples[t] * net_t(y)  at a batch
    of points, slicing extra trailing coordinates off y.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] == plan.n_points and plan.n_points != plan.n_triples:
        rows = np.array([t.point_ref for t in plan.triples], dtype=int)
        samples = samples[rows]
    if samples.shape[0] != plan.n_triples:
        raise ValueError("need one sample per plan triple "
                         f"(got {samples.shape[0]} for {plan.n_triples})")
    dim = max(plan.m_active, 1)
    source = _coeff_source(None)
    nets, labels, signs = [], [], []
    for t in plan.triples:
        s = plan.indices[t.s_ref]
        sme = s.subtract_mask(t.e_mask)
        gate = min(s.support) if s.pairs else 1
        label = {"s": [list(p) for p in s.pairs],
                 "e": list(t.e_mask), "k": list(t.k)}
        nets.append(assemble_phi_triple(
            sme, t.k, source, omega, delta,
            input_dim=dim, gate_coord=gate, label=label))
        labels.append(label)
        signs.append(float(t.sign))
    signs = np.asarray(signs)
    bundle = NetworkBundle(nets, labels, meta={
        "xi": plan.xi, "delta": delta, "omega": omega,
        "n_triples": plan.n_triples})

    def evaluator(y):
        y_arr = np.asarray(y, dtype=float)
        single = y_arr.ndim == 1
        pts = y_arr[None, :] if single else y_arr
        if pts.shape[1] < dim:
            raise ValueError(
                f"points have {pts.shape[1]} coordinates; plan needs {dim}")
        pts = pts[:, :dim]
        out = np.zeros((pts.shape[0], samples.shape[1]))
        for t in range(len(nets)):
            phi = nets[t].eval_batch(pts)[:, 0]
            out += (signs[t] * phi)[:, None] * samples[t][None, :]
        if samples.shape[1] == 1:
            out = out[:, 0]
        return out[0] if single else out

    return bundle, evaluator


def surrogate_bound(bundle, samples, norm=None):
    """Certificate for the surrogate-vs-interpolant gap on the box:
    delta * sum_t ||sample_t|| * coeff_abs_sum_t.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if norm is None:
        norm = lambda v: float(np.linalg.norm(v))
    delta = bundle.meta.get("delta")
    total = 0.0
    for t, net in enumerate(bundle.networks):
        total += norm(samples[t]) * net.meta["coeff_abs_sum"]
    return delta * total


# ---------------------------------------------------------------------------
# accuracy parameter

_BMAX_CACHE = {0: 1.0}


def _coeff_bmax(m):
    """Largest |monomial coefficient| over the order-m cardinal table."""
    v = _BMAX_CACHE.get(m)
    if v is None:
        v = float(np.abs(lagrange_coeffs(m).coeff_table).max())
        _BMAX_CACHE[m] = v
    return v


def fit_delta_K(max_degree):
    """Exponent K with sum_{k} exp(y_k^2/4) <= exp(K*m) over node sums.

    c_m = (2*pi)^{1/4} * sum_{k in the order-m family} exp(y_k^2 / 4)
    grows exponentially; K is the largest observed log(c_m)/m for
    1 <= m <= max_degree (0.0 when max_degree < 1).
    """
    best = 0.0
    for m in range(1, max_degree + 1):
        fam = NodeFamily(m)
        c = (2.0 * math.pi) ** 0.25 * float(
            np.exp(fam.nodes ** 2 / 4.0).sum())
        best = max(best, math.log(c) / m)
    return best


def compute_delta(plan, omega, w=None, K=None, *, return_info=False):
    """Accuracy parameter for compiling `plan` at box parameter omega.

    1/delta = xi^(1/q - 1/2) * sum_s exp(K|s|) p_s(2) (4 sqrt(omega))^|s| B_s
    with B_s the product over support coordinates of the largest cardinal
    monomial coefficient at order s_j or s_j - 1.  Evaluated in log
    space, clamped into (0, 1/2], and floored at DELTA_FLOOR (a float64
    evaluation cannot certify below that); both values are reported when
    return_info is set.
    """
    if omega < 1:
        raise ValueError("omega must be >= 1")
    model = w if w is not None else plan.model
    if K is None:
        K = fit_delta_K(plan.m1)
    log_scale = math.log(4.0 * math.sqrt(omega))
    terms = []
    for s in plan.indices:
        tot = s.total_degree
        log_b = 0.0
        for _, sj in s.pairs:
            log_b += math.log(max(_coeff_bmax(sj), _coeff_bmax(sj - 1)))
        terms.append(K * tot + math.log(p_weight(s, 2.0, model.lam))
                     + tot * log_scale + log_b)
    log_inv = ((1.0 / model.q - 0.5) * math.log(plan.xi)
               + float(logsumexp(terms)))
    requested = math.exp(-log_inv) if log_inv < 700 else 0.0
    delta = min(0.5, max(requested, DELTA_FLOOR))
    if return_info:
        return delta, {"delta_requested": requested, "K": K,
                       "log_inv_delta": log_inv}
    return delta


# ---------------------------------------------------------------------------
# serialization

def network_to_dict(net):
    """JSON-ready form: per-layer blocks over all earlier columns.

    Small blocks are dense row-major; large ones use sparse
    [row, col, weight] entries (ascending), which round-trips the exact
    row order either way.
    """
    layers = []
    col_base = net.input_dim
    for layer in net.layers:
        rows = layer.width
        cols = col_base
        # dense form loses entry order, so it is only safe when every
        # row is strictly ascending (the sparse form keeps stored order)
        ascending = all(
            len(c) < 2 or bool(np.all(np.diff(c) > 0))
            for c, _ in layer.rows)
        if rows * cols <= _DENSE_CELL_LIMIT and ascending:
            block = np.zeros((rows, cols))
            for r, (c, w) in enumerate(layer.rows):
                block[r, c] = w
            layers.append({"rows": rows, "cols": cols,
                           "weights": [float(v) for v in block.ravel()],
                           "bias": [float(v) for v in layer.bias]})
        else:
            entries = []
            for r, (c, w) in enumerate(layer.rows):
                entries.extend([[int(r), int(cc), float(ww)]
                                for cc, ww in zip(c, w)])
            layers.append({"rows": rows, "cols": cols, "entries": entries,
                           "bias": [float(v) for v in layer.bias]})
        col_base += rows
    meta = {k: v for k, v in net.meta.items() if _json_safe(v)}
    return {"input_dim": net.input_dim, "layers": layers, "meta": meta}


def _json_safe(v):
    if isinstance(v, (str, int, float, bool, type(None))):
        return True
    if isinstance(v, (list, tuple)):
        return all(_json_safe(x) for x in v)
    if isinstance(v, dict):
        return all(isinstance(k, str) and _json_safe(x) for k, x in v.items())
    return False


def network_from_dict(data):
    """Rebuild a network; validates the recorded size and depth."""
    layers = []
    for spec in data["layers"]:
        rows_n, cols_n = int(spec["rows"]), int(spec["cols"])
        rows = []
        if "weights" in spec:
            block = np.asarray(spec["weights"], dtype=float)
            if block.size != rows_n * cols_n:
                raise ValueError("dense block has wrong cell count")
            block = block.reshape(rows_n, cols_n)
            for r in range(rows_n):
                nz = np.nonzero(block[r])[0]
                rows.append((nz.astype(np.int64), block[r, nz]))
        else:
            # entry order within a row is the stored accumulation order;
            # keep it (merged rows are deliberately not globally sorted)
            per_row = [[] for _ in range(rows_n)]
            for r, c, wv in spec["entries"]:
                per_row[int(r)].append((int(c), float(wv)))
            for r in range(rows_n):
                cols = np.array([c for c, _ in per_row[r]], dtype=np.int64)
                wts = np.array([wv for _, wv in per_row[r]])
                rows.append((cols, wts))
        layers.append(_Layer(rows, [float(v) for v in spec["bias"]]))
    net = ReluNetwork(int(data["input_dim"]), layers, data.get("meta"))
    meta = data.get("meta", {})
    if "W" in meta and meta["W"] != net.size:
        raise ValueError(f"stored size {meta['W']} != recount {net.size}")
    if "L" in meta and meta["L"] != net.depth:
        raise ValueError(f"stored depth {meta['L']} != recount {net.depth}")
    return net


def save_network(net, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh, sort_keys=True,
                  separators=(",", ":"))
        fh.write("\n")


def load_network(path):
    with open(path, encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def bundle_to_dict(bundle, plan=None):
    out = {"meta": dict(bundle.meta), "input_dim": bundle.input_dim,
           "W": bundle.W, "L": bundle.L,
           "networks": [network_to_dict(n) for n in bundle.networks],
           "labels": bundle.labels}
    if plan is not None:
        out["plan_xi"] = plan.xi
    return out


def bundle_from_dict(data):
    nets = [network_from_dict(d) for d in data["networks"]]
    return NetworkBundle(nets, data["labels"], meta=data.get("meta"))
