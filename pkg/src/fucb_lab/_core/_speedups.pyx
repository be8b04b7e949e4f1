# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled UCB state machine; semantics mirror _pure.py exactly.

Same expressions in the same order as the pure backend (both call the
platform libm), so arm sequences are bit-identical across backends.
"""

from libc.math cimport ceil, log, sqrt, INFINITY, NAN
from libc.stdlib cimport calloc, free, malloc, realloc
from libc.string cimport memmove, memset


cdef class FUcbCore:
    """Per-bin arrival counters, per-(bin, arm) counts and outcome records."""

    cdef readonly int n_arms
    cdef readonly double lipschitz_c
    cdef readonly double beta
    cdef readonly int kind
    cdef readonly double param1
    cdef readonly double param2
    cdef readonly bint store_samples

    cdef dict _slots
    cdef Py_ssize_t _cap
    cdef Py_ssize_t _nslots
    cdef long long* _N
    cdef long long* _S
    cdef double* _sums
    cdef double** _buf
    cdef long long* _buflen
    cdef long long* _bufcap

    backend = "cython"

    def __cinit__(self, int n_arms, double lipschitz_c, double beta,
                  int kind, double param1=0.0, double param2=0.0):
        self.n_arms = n_arms
        self.lipschitz_c = lipschitz_c
        self.beta = beta
        self.kind = kind
        self.param1 = param1
        self.param2 = param2
        self.store_samples = kind != 0
        self._slots = {}
        self._cap = 16
        self._nslots = 0
        cdef Py_ssize_t k = self._cap * n_arms
        self._N = <long long*> malloc(self._cap * sizeof(long long))
        self._S = <long long*> calloc(k, sizeof(long long))
        self._sums = <double*> calloc(k, sizeof(double))
        self._buf = <double**> calloc(k, sizeof(double*))
        self._buflen = <long long*> calloc(k, sizeof(long long))
        self._bufcap = <long long*> calloc(k, sizeof(long long))
        if (self._N == NULL or self._S == NULL or self._sums == NULL or
                self._buf == NULL or self._buflen == NULL or self._bufcap == NULL):
            raise MemoryError()

    def __dealloc__(self):
        cdef Py_ssize_t i
        if self._buf != NULL:
            for i in range(self._nslots * self.n_arms):
                if self._buf[i] != NULL:
                    free(self._buf[i])
            free(self._buf)
        free(self._N)
        free(self._S)
        free(self._sums)
        free(self._buflen)
        free(self._bufcap)

    cdef Py_ssize_t _slot(self, long long j) except -1:
        cdef object s = self._slots.get(j)
        cdef Py_ssize_t slot, k, old
        if s is not None:
            return <Py_ssize_t> s
        slot = self._nslots
        if slot == self._cap:
            old = self._cap
            self._cap = old * 2
            k = self._cap * self.n_arms
            self._N = <long long*> realloc(self._N, self._cap * sizeof(long long))
            self._S = <long long*> realloc(self._S, k * sizeof(long long))
            self._sums = <double*> realloc(self._sums, k * sizeof(double))
            self._buf = <double**> realloc(self._buf, k * sizeof(double*))
            self._buflen = <long long*> realloc(self._buflen, k * sizeof(long long))
            self._bufcap = <long long*> realloc(self._bufcap, k * sizeof(long long))
            if (self._N == NULL or self._S == NULL or self._sums == NULL or
                    self._buf == NULL or self._buflen == NULL or self._bufcap == NULL):
                raise MemoryError()
            memset(self._S + old * self.n_arms, 0,
                   (k - old * self.n_arms) * sizeof(long long))
            memset(self._sums + old * self.n_arms, 0,
                   (k - old * self.n_arms) * sizeof(double))
            memset(self._buf + old * self.n_arms, 0,
                   (k - old * self.n_arms) * sizeof(double*))
            memset(self._buflen + old * self.n_arms, 0,
                   (k - old * self.n_arms) * sizeof(long long))
            memset(self._bufcap + old * self.n_arms, 0,
                   (k - old * self.n_arms) * sizeof(long long))
        self._N[slot] = 1
        self._nslots += 1
        self._slots[j] = slot
        return slot

    cdef double _eval(self, Py_ssize_t slot, int i) noexcept:
        """Functional estimate for arm i (0-based); NaN when undefined."""
        cdef Py_ssize_t base = slot * self.n_arms + i
        cdef long long m = self._S[base]
        cdef double* buf
        cdef long long k, first, last, idx
        cdef double total
        if self.kind == 0:
            return self._sums[base] / m
        buf = self._buf[base]
        if self.kind == 1:
            k = <long long> ceil(self.param1 * m)
            return buf[k - 1]
        first = <long long> ceil(m * self.param1)
        last = m - <long long> ceil(m * self.param2)
        if last <= first:
            return NAN
        total = 0.0
        for idx in range(first, last):
            total += buf[idx]
        return total / (last - first)

    cdef int _assign(self, long long j) except -1:
        cdef Py_ssize_t slot = self._slot(j)
        cdef long long N = self._N[slot]
        if N <= self.n_arms:
            return <int> N
        cdef double logn = log(<double> N)
        cdef int best = 1
        cdef double best_index = -INFINITY
        cdef double value, index
        cdef int i
        cdef Py_ssize_t base = slot * self.n_arms
        for i in range(self.n_arms):
            if self._S[base + i] == 0:
                index = INFINITY        # unpulled arm: must explore
            else:
                value = self._eval(slot, i)
                if value != value:      # undefined estimate: force exploration
                    index = INFINITY
                else:
                    index = value + self.lipschitz_c * sqrt(
                        self.beta * logn / (2.0 * self._S[base + i]))
            if index > best_index:
                best_index = index
                best = i + 1
        return best

    cdef int _update(self, long long j, int arm, double y) except -1:
        if arm < 1 or arm > self.n_arms:
            raise ValueError(f"arm {arm} outside 1..{self.n_arms}")
        cdef Py_ssize_t slot = self._slot(j)
        cdef Py_ssize_t base = slot * self.n_arms + (arm - 1)
        cdef long long m, lo, hi, mid, cap
        cdef double* buf
        self._N[slot] += 1
        self._S[base] += 1
        self._sums[base] += y
        if self.store_samples:
            m = self._S[base] - 1       # length before insertion
            cap = self._bufcap[base]
            buf = self._buf[base]
            if m == cap:
                cap = 8 if cap == 0 else cap * 2
                buf = <double*> realloc(buf, cap * sizeof(double))
                if buf == NULL:
                    raise MemoryError()
                self._buf[base] = buf
                self._bufcap[base] = cap
            # bisect_right: first position with buf[pos] > y
            lo = 0
            hi = m
            while lo < hi:
                mid = (lo + hi) >> 1
                if y < buf[mid]:
                    hi = mid
                else:
                    lo = mid + 1
            if lo < m:
                memmove(buf + lo + 1, buf + lo, (m - lo) * sizeof(double))
            buf[lo] = y
            self._buflen[base] = m + 1
        return 0

    def assign(self, j):
        """Arm for the next arrival in bin j (1-based); read-only."""
        return self._assign(j)

    def update(self, j, arm, y):
        self._update(j, arm, y)

    # introspection (tests and invariants)

    def arrivals(self, j):
        s = self._slots.get(j)
        if s is None:
            return 1
        return self._N[<Py_ssize_t> s]

    def pulls(self, j, arm):
        s = self._slots.get(j)
        if s is None:
            return 0
        return self._S[(<Py_ssize_t> s) * self.n_arms + (arm - 1)]

    def outcome_sum(self, j, arm):
        s = self._slots.get(j)
        if s is None:
            return 0.0
        return self._sums[(<Py_ssize_t> s) * self.n_arms + (arm - 1)]

    def samples_of(self, j, arm):
        if not self.store_samples:
            return None
        s = self._slots.get(j)
        if s is None:
            return None
        cdef Py_ssize_t base = (<Py_ssize_t> s) * self.n_arms + (arm - 1)
        cdef long long i
        return [self._buf[base][i] for i in range(self._buflen[base])]

    def occupied_bins(self):
        return sorted(self._slots)


def run_episode_loop(FUcbCore core, long long[::1] J, double[:, ::1] Y,
                     double[:, ::1] reg, unsigned char[:, ::1] subopt,
                     arms_out=None):
    """Drive assign/update over precomputed per-step blocks.

    J: bin ids (n,); Y: potential outcomes (n, K); reg: instantaneous regret
    if arm chosen (n, K); subopt: 0/1 suboptimality mask (n, K).
    Returns (cumulative regret, suboptimal count).
    """
    cdef Py_ssize_t n = J.shape[0]
    cdef Py_ssize_t t
    cdef int a
    cdef double total = 0.0
    cdef long long count = 0
    cdef bint record = arms_out is not None
    cdef long long[::1] arms_mv
    if record:
        arms_mv = arms_out
    for t in range(n):
        a = core._assign(J[t])
        core._update(J[t], a, Y[t, a - 1])
        total += reg[t, a - 1]
        count += subopt[t, a - 1]
        if record:
            arms_mv[t] = a
    return total, count
