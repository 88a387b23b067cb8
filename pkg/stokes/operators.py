from typing import Optional

from fields.norms import AnyProfile
from fields.profiles import ScalarProfile, TensorProfile, VectorProfile
from fields.spectral import FourierWorkspace


def _workspace(field, ws: Optional[FourierWorkspace]) -> FourierWorkspace:
    return ws if ws is not None else FourierWorkspace(field.grid)


def leray_project(field: VectorProfile, ws: Optional[FourierWorkspace] = None) -> VectorProfile:
    """Apply I - k k^T/|k|^2 mode by mode; the zero mode is left unchanged"""
    ws = _workspace(field, ws)
    return field.with_data(ws.inverse(ws.project_spectrum(ws.forward(field.data))))


def heat_propagate(field: AnyProfile, duration: float, ws: Optional[FourierWorkspace] = None):
    """e^{duration * Delta} on the periodic box"""
    if duration < 0:
        raise ValueError(f'heat propagation needs a nonnegative duration, got {duration}')
    if duration == 0:
        return field.with_data(field.data.copy())
    ws = _workspace(field, ws)
    return field.with_data(ws.inverse(ws.heat_spectrum(ws.forward(field.data), duration)))


def recover_pressure(source: TensorProfile, ws: Optional[FourierWorkspace] = None) -> ScalarProfile:
    """
    P = Delta^{-1} div div f, multiplier k^T f k / |k|^2, mean zero.

    For the profile system pass f = sigma (G G^t - U x U).
    """
    ws = _workspace(source, ws)
    spectrum = ws.inverse_laplacian_divdiv_spectrum(ws.forward(source.data))
    return ScalarProfile(source.grid, ws.inverse(spectrum), source.gamma)
