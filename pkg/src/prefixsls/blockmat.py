"""Block lower-triangular and block-diagonal matrices on a common time grid.

Everything downstream (stacked dynamics, system responses, controllers) is a
matrix whose rows and columns are partitioned by time step 0..T.  Causality
shows up as block lower-triangularity, and most of the algebra in this package
is products, sums, truncations and inversions that preserve it.  These classes
keep the grid bookkeeping in one place and enforce the structural zeros
explicitly so that floating point noise never creeps into blocks that are zero
by construction.
"""

import numpy as np
from scipy.linalg import solve_triangular


class StructureError(ValueError):
    """Raised when data violates the declared block structure."""


class BlockGrid:
    """Partition of row and column indices into T+1 blocks.

    row_dims[t] and col_dims[t] give the size of block t.  The number of row
    blocks always equals the number of column blocks (one per time step), but
    the per-block sizes may differ, e.g. state rows against input columns.
    """

    __slots__ = ("row_dims", "col_dims", "_row_off", "_col_off")

    def __init__(self, row_dims, col_dims):
        row_dims = tuple(int(d) for d in row_dims)
        col_dims = tuple(int(d) for d in col_dims)
        if len(row_dims) != len(col_dims):
            raise StructureError(
                "grid needs one row block and one column block per time step, "
                f"got {len(row_dims)} vs {len(col_dims)}"
            )
        if len(row_dims) == 0:
            raise StructureError("grid must cover at least time step 0")
        if any(d < 1 for d in row_dims) or any(d < 1 for d in col_dims):
            raise StructureError("block dimensions must be positive")
        self.row_dims = row_dims
        self.col_dims = col_dims
        self._row_off = np.concatenate(([0], np.cumsum(row_dims)))
        self._col_off = np.concatenate(([0], np.cumsum(col_dims)))

    @classmethod
    def uniform(cls, horizon, row_dim, col_dim):
        """Grid with identical block sizes at every step 0..horizon."""
        return cls((row_dim,) * (horizon + 1), (col_dim,) * (horizon + 1))

    @property
    def horizon(self):
        return len(self.row_dims) - 1

    @property
    def row_total(self):
        return int(self._row_off[-1])

    @property
    def col_total(self):
        return int(self._col_off[-1])

    def row_slice(self, t):
        return slice(int(self._row_off[t]), int(self._row_off[t + 1]))

    def col_slice(self, t):
        return slice(int(self._col_off[t]), int(self._col_off[t + 1]))

    def sub(self, t):
        """Grid restricted to time steps 0..t."""
        if not 0 <= t <= self.horizon:
            raise StructureError(f"truncation step {t} outside 0..{self.horizon}")
        return BlockGrid(self.row_dims[: t + 1], self.col_dims[: t + 1])

    def is_block_square(self):
        return self.row_dims == self.col_dims

    def __eq__(self, other):
        return (
            isinstance(other, BlockGrid)
            and self.row_dims == other.row_dims
            and self.col_dims == other.col_dims
        )

    def __hash__(self):
        return hash((self.row_dims, self.col_dims))

    def __repr__(self):
        return f"BlockGrid(row_dims={self.row_dims}, col_dims={self.col_dims})"


def _zero_upper(grid, data):
    """Hard-zero every block strictly above the block diagonal, in place."""
    T = grid.horizon
    for t in range(T):
        data[grid.row_slice(t), grid._col_off[t + 1] :] = 0.0
    return data


def _check_upper(grid, data, where):
    scale = max(1.0, float(np.max(np.abs(data))) if data.size else 0.0)
    T = grid.horizon
    worst = 0.0
    for t in range(T):
        block = data[grid.row_slice(t), grid._col_off[t + 1] :]
        if block.size:
            worst = max(worst, float(np.max(np.abs(block))))
    if worst > 1e-9 * scale:
        raise StructureError(
            f"{where}: block upper triangle carries magnitude {worst:.3e}, "
            "not structurally zero"
        )


class BlockLTMatrix:
    """Block lower-triangular matrix: block (t, tau) is zero for tau > t.

    Construction copies the data, verifies the upper blocks vanish (up to a
    relative 1e-9, to tolerate prior float noise) and then zeroes them exactly.
    Products and sums re-zero, so the invariant survives round-off.
    """

    __slots__ = ("grid", "_data")

    def __init__(self, grid, data, check=True):
        data = np.array(data, dtype=float)
        if data.shape != (grid.row_total, grid.col_total):
            raise StructureError(
                f"data shape {data.shape} does not match grid "
                f"({grid.row_total}, {grid.col_total})"
            )
        if check:
            _check_upper(grid, data, "BlockLTMatrix")
        _zero_upper(grid, data)
        self.grid = grid
        self._data = data

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.row_total, grid.col_total)), check=False)

    @classmethod
    def identity(cls, grid):
        if not grid.is_block_square():
            raise StructureError("identity needs a block-square grid")
        return cls(grid, np.eye(grid.row_total), check=False)

    @classmethod
    def from_blocks(cls, grid, blocks):
        """Assemble from a {(t, tau): array} dict; missing blocks are zero."""
        out = np.zeros((grid.row_total, grid.col_total))
        for (t, tau), blk in blocks.items():
            if tau > t:
                raise StructureError(f"block ({t}, {tau}) lies above the diagonal")
            blk = np.asarray(blk, dtype=float)
            rs, cs = grid.row_slice(t), grid.col_slice(tau)
            if blk.shape != (rs.stop - rs.start, cs.stop - cs.start):
                raise StructureError(
                    f"block ({t}, {tau}) has shape {blk.shape}, grid wants "
                    f"({rs.stop - rs.start}, {cs.stop - cs.start})"
                )
            out[rs, cs] = blk
        return cls(grid, out, check=False)

    @property
    def dense(self):
        """Copy of the full matrix."""
        return self._data.copy()

    @property
    def shape(self):
        return self._data.shape

    @property
    def horizon(self):
        return self.grid.horizon

    def block(self, t, tau):
        """Copy of block (t, tau)."""
        return self._data[self.grid.row_slice(t), self.grid.col_slice(tau)].copy()

    def block_row(self, t):
        """Copy of the row band [M_{t,0} ... M_{t,t}] (structural zeros cut)."""
        return self._data[self.grid.row_slice(t), : self.grid._col_off[t + 1]].copy()

    def truncate(self, t):
        """Leading principal block submatrix through time step t."""
        g = self.grid.sub(t)
        return BlockLTMatrix(
            g, self._data[: g.row_total, : g.col_total], check=False
        )

    def __matmul__(self, other):
        if isinstance(other, BlockLTMatrix):
            if self.grid.col_dims != other.grid.row_dims:
                raise StructureError("grids incompatible for product")
            g = BlockGrid(self.grid.row_dims, other.grid.col_dims)
            return BlockLTMatrix(g, self._data @ other._data, check=False)
        if isinstance(other, BlockDiagMatrix):
            if self.grid.col_dims != other.grid.row_dims:
                raise StructureError("grids incompatible for product")
            g = BlockGrid(self.grid.row_dims, other.grid.col_dims)
            out = np.zeros((g.row_total, g.col_total))
            # right-multiplying by a block diagonal scales column bands
            for tau in range(g.horizon + 1):
                out[:, g.col_slice(tau)] = (
                    self._data[:, self.grid.col_slice(tau)] @ other.blocks[tau]
                )
            return BlockLTMatrix(g, out, check=False)
        if isinstance(other, np.ndarray):
            return self._data @ other
        return NotImplemented

    def __add__(self, other):
        if not isinstance(other, BlockLTMatrix) or self.grid != other.grid:
            return NotImplemented
        return BlockLTMatrix(self.grid, self._data + other._data, check=False)

    def __sub__(self, other):
        if not isinstance(other, BlockLTMatrix) or self.grid != other.grid:
            return NotImplemented
        return BlockLTMatrix(self.grid, self._data - other._data, check=False)

    def __neg__(self):
        return BlockLTMatrix(self.grid, -self._data, check=False)

    def __mul__(self, scalar):
        return BlockLTMatrix(self.grid, self._data * float(scalar), check=False)

    __rmul__ = __mul__

    def __repr__(self):
        return f"BlockLTMatrix(T={self.horizon}, shape={self._data.shape})"


class BlockDiagMatrix:
    """Block diagonal matrix, one block per time step."""

    __slots__ = ("grid", "blocks")

    def __init__(self, blocks):
        blocks = [np.array(b, dtype=float, ndmin=2) for b in blocks]
        if not blocks:
            raise StructureError("need at least the block for time step 0")
        self.grid = BlockGrid(
            tuple(b.shape[0] for b in blocks), tuple(b.shape[1] for b in blocks)
        )
        self.blocks = blocks

    @property
    def horizon(self):
        return self.grid.horizon

    @property
    def shape(self):
        return (self.grid.row_total, self.grid.col_total)

    def block(self, t):
        return self.blocks[t].copy()

    @property
    def dense(self):
        out = np.zeros(self.shape)
        for t, b in enumerate(self.blocks):
            out[self.grid.row_slice(t), self.grid.col_slice(t)] = b
        return out

    def to_lt(self):
        return BlockLTMatrix(self.grid, self.dense, check=False)

    def truncate(self, t):
        return BlockDiagMatrix(self.blocks[: t + 1])

    def __matmul__(self, other):
        if isinstance(other, BlockDiagMatrix):
            if self.grid.col_dims != other.grid.row_dims:
                raise StructureError("grids incompatible for product")
            return BlockDiagMatrix(
                [a @ b for a, b in zip(self.blocks, other.blocks)]
            )
        if isinstance(other, BlockLTMatrix):
            if self.grid.col_dims != other.grid.row_dims:
                raise StructureError("grids incompatible for product")
            g = BlockGrid(self.grid.row_dims, other.grid.col_dims)
            out = np.zeros((g.row_total, g.col_total))
            for t in range(g.horizon + 1):
                out[g.row_slice(t), :] = (
                    self.blocks[t] @ other._data[other.grid.row_slice(t), :]
                )
            return BlockLTMatrix(g, out, check=False)
        if isinstance(other, np.ndarray):
            return self.dense @ other
        return NotImplemented

    def __repr__(self):
        return f"BlockDiagMatrix(T={self.horizon}, shape={self.shape})"


def blkdiag(blocks):
    """Stack matrices into a BlockDiagMatrix, one block per time step."""
    return BlockDiagMatrix(blocks)


def downshift(horizon, dim):
    """Block downshift Z: (Z x)_t = x_{t-1}, with (Z x)_0 = 0.

    Identity blocks sit on the first subdiagonal; everything else is zero.
    Z is nilpotent of order horizon + 1.
    """
    g = BlockGrid.uniform(horizon, dim, dim)
    return BlockLTMatrix.from_blocks(
        g, {(t, t - 1): np.eye(dim) for t in range(1, horizon + 1)}
    )


def truncate(mat, t):
    """Leading principal block submatrix of a block matrix through step t."""
    return mat.truncate(t)


def invert_unit_lower(mat):
    """Invert a block lower-triangular matrix with identity diagonal blocks.

    Matrices of the form I - Z A are always in this class, and their inverses
    are again unit block lower-triangular, which the returned value preserves
    exactly (structural zeros are re-enforced after the triangular solve).

    Raises StructureError if a diagonal block deviates from identity by more
    than 1e-12 in max-abs.
    """
    if not mat.grid.is_block_square():
        raise StructureError("inversion needs a block-square grid")
    for t in range(mat.horizon + 1):
        d = mat.block(t, t)
        if np.max(np.abs(d - np.eye(d.shape[0]))) > 1e-12:
            raise StructureError(
                f"diagonal block {t} is not the identity; "
                "matrix is outside the unit lower-triangular class"
            )
    n = mat.shape[0]
    inv = solve_triangular(
        mat._data, np.eye(n), lower=True, unit_diagonal=True
    )
    return BlockLTMatrix(mat.grid, inv, check=False)
