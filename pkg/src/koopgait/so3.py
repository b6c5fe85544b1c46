"""Numerically careful SO(3) primitives.

Rotations are plain 3x3 numpy arrays. Tangent vectors are rotation vectors
(axis * angle, radians). The retraction convention used everywhere in this
package is the right (body-frame) perturbation R <- R @ so3_exp(delta).
"""

from __future__ import annotations

import numpy as np

# Angle below which Taylor branches replace the trigonometric coefficients.
SMALL_ANGLE = 1e-8

# Rejection threshold for orthonormality / determinant of rotation inputs.
ORTHONORMAL_TOL = 1e-10

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def hat(v) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector (hat operator)."""
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(m) -> np.ndarray:
    """Inverse of hat for a skew-symmetric matrix."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def so3_exp(omega) -> np.ndarray:
    """Rodrigues exponential map of a rotation vector.

    Uses a second-order Taylor expansion of the Rodrigues coefficients for
    angles below SMALL_ANGLE.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (3,):
        raise ValueError(f"rotation vector must have shape (3,), got {omega.shape}")
    if not np.all(np.isfinite(omega)):
        raise ValueError("non-finite rotation vector")
    theta2 = float(omega @ omega)
    w = hat(omega)
    if theta2 < SMALL_ANGLE**2:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        theta = np.sqrt(theta2)
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    return np.eye(3) + a * w + b * (w @ w)


def check_rotation(r, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    """Validate a rotation matrix, returning it as a float array."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise ValueError(f"rotation must have shape (3, 3), got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite rotation matrix")
    err = np.max(np.abs(r.T @ r - np.eye(3)))
    if err > tol:
        raise ValueError(f"matrix is not orthonormal (max |R^T R - I| = {err:.3e})")
    if abs(np.linalg.det(r) - 1.0) > tol * 100:
        raise ValueError("matrix has determinant != +1")
    return r


def so3_log(r, validate: bool = True) -> np.ndarray:
    """Principal logarithm of a rotation matrix, norm <= pi.

    The angle comes from the trace; a symmetric-part branch handles angles
    at or next to pi where sin(theta) degenerates. validate=False skips the
    orthonormality check for callers whose input is a product of rotations.
    """
    if validate:
        r = check_rotation(r)
    else:
        r = np.asarray(r, dtype=float)
    skew = vee(r - r.T) / 2.0
    sin_theta = np.linalg.norm(skew)
    cos_theta = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    # atan2 keeps the angle well conditioned where arccos degenerates
    theta = np.arctan2(sin_theta, cos_theta)
    if theta < SMALL_ANGLE:
        return skew * (1.0 + theta**2 / 6.0)
    if np.pi - theta < 1e-7:
        # axis from the symmetric part (R + I)/2 ~= a a^T near theta = pi
        b = (r + np.eye(3)) / 2.0
        diag = np.clip(np.diag(b), 0.0, None)
        i = int(np.argmax(diag))
        axis = b[i] / np.sqrt(diag[i])
        axis = axis / np.linalg.norm(axis)
        return theta * axis
    return theta / sin_theta * skew


def right_jacobian_inv(omega) -> np.ndarray:
    """Inverse of the right Jacobian of SO(3) at a rotation vector.

    Satisfies Log(Exp(omega) Exp(delta)) ~= omega + right_jacobian_inv(omega) @ delta.
    """
    omega = np.asarray(omega, dtype=float)
    theta2 = float(omega @ omega)
    w = hat(omega)
    if theta2 < 1e-8:
        c = 1.0 / 12.0 + theta2 / 720.0
    else:
        theta = np.sqrt(theta2)
        half = theta / 2.0
        # 1/theta^2 - cot(theta/2) / (2 theta); no singularity for theta <= pi
        c = 1.0 / theta2 - np.cos(half) / (2.0 * theta * np.sin(half))
    return np.eye(3) + 0.5 * w + c * (w @ w)


def project_to_so3(m) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (SVD projection)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def rotation_aligning(a, b) -> np.ndarray:
    """Minimal rotation taking unit vector a to unit vector b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    c = float(np.clip(a @ b, -1.0, 1.0))
    if s < 1e-12:
        if c > 0.0:
            return np.eye(3)
        # opposite vectors: rotate by pi about any axis orthogonal to a
        ortho = np.cross(a, E1)
        if np.linalg.norm(ortho) < 1e-6:
            ortho = np.cross(a, E2)
        ortho = ortho / np.linalg.norm(ortho)
        return so3_exp(np.pi * ortho)
    return so3_exp(axis / s * np.arctan2(s, c))


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
