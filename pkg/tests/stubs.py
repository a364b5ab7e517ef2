"""A two-dimensional linear test problem: ``A = [[s, -1], [1, s]]`` with ``h = 0``."""

import numpy as np
import scipy.sparse as sp

from hopfkit.problems import EvolutionProblem


class RotationProblem(EvolutionProblem):
    name = "rotation"

    def __init__(self, shift=0.0):
        super().__init__(1, np.ones((2, 1)))
        self.shift = shift

    def matrix(self):
        return sp.csr_matrix(np.array([[self.shift, -1.0], [1.0, self.shift]]))

    def h_eval(self, lam, u):
        return np.zeros_like(u)

    def h_u_apply(self, lam, u, du):
        return np.zeros_like(du)

    def h_lambda(self, lam, u):
        return np.zeros_like(u)

    def h_lambda_u_apply(self, du):
        return np.zeros_like(du)

    def psi_star_guess(self):
        return np.array([[1.0], [-1.0j]])
