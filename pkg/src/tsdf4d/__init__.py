"""Low-rank tensor compression for time-varying signed distance volumes."""

from .container import read_header, read_scene, write_scene
from .decompose import (
    TruncationSpec,
    insert_time_mode,
    to_tt_tucker,
    tt_concat,
    tt_norm,
    tt_round,
    tt_slice,
    tt_svd,
    tucker_hosvd,
)
from .errors import BudgetError, RangeError, ValidationError
from .metrics import MetricReport, chamfer, hausdorff, iou, l2
from .pipeline import (
    AxisLayout,
    CompressedScene,
    compress_scene,
    extract_frame,
    frame_to_dense,
    query_gradient,
    query_point,
)
from .quantics import (
    QuantLayout,
    frame_subindex,
    frame_to_oqtt,
    frame_to_qtt,
    qindex_to_voxel,
    voxel_to_qindex,
)
from .tensors import (
    DenseVolume,
    StorageReport,
    TTTensor,
    TTTuckerTensor,
    TuckerTensor,
    crop,
    pad_to_pow2,
    storage_report,
    tt_element,
    tt_to_dense,
    tttucker_element,
    tucker_element,
)

__version__ = "0.1.0"
