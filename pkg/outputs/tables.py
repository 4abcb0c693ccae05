# outputs/tables.py
"""CSV series for plotting: spectra, sampled controls, moment residuals, family norms."""
import logging
from pathlib import Path
from typing import List

import pandas as pd

from inputs.state import SampledControl

logger = logging.getLogger(__name__)


def control_frame(control: SampledControl, phase: str = "null") -> pd.DataFrame:
    if control.is_ledger:
        raise ValueError("control_frame expects a scalar control.")
    return pd.DataFrame({
        "phase": phase,
        "t": control.times,
        "h_re": control.samples.real,
        "h_im": control.samples.imag,
    })


def phases_frame(phases: List) -> pd.DataFrame:
    """Concatenated control series of a pipeline run (objects with ``name`` and ``control``)."""
    frames = [control_frame(p.control, p.name) for p in phases]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["phase", "t", "h_re", "h_im"])


def write_csv(path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # %.17g round-trips doubles
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path
