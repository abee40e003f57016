"""3D representations for event-camera streams.

The package turns raw (x, y, t, polarity) event recordings into two compact
3D forms - rasterized event point clouds and decoupled tri-plane voxels -
plus the cross-plane attention fusion that joins the planes, codecs for pose
targets, count-based windowing with label attachment, a synthetic stick-figure
event simulator, and binary containers plus a CLI tying it all together.
"""

from .dea import dea_fuse, fuse, pool_expand, correlate, read_ten1, write_ten1
from .devox import (
    DevPlanes,
    VoxelGrid,
    axis_sums,
    project_dev,
    quantize,
    read_dev1,
    sample_dev,
    storage_cost,
    voxelize_dense,
    write_dev1,
)
from .event_core import (
    EVENT_DTYPE,
    Event,
    EventWindow,
    SensorGeometry,
    canonicalize,
    merge_streams,
    validate_window,
)
from .ingest import (
    LabelTrack,
    LabeledWindow,
    labeled_windows,
    last_label,
    mean_label,
    read_csv,
    read_evt1,
    read_joints,
    read_label_track,
    window_by_count,
    window_multiview,
    write_csv,
    write_evt1,
    write_joints,
    write_label_track,
)
from .pose_codec import (
    Heatmap2D,
    JointSet,
    heatmap_decode,
    heatmap_encode,
    mpjpe,
    simdr_decode,
    simdr_encode,
)
from .rasepc import (
    RasterCloud,
    RasterStream,
    raster_stream_update,
    rasterize,
    read_rpc1,
    sample_fixed,
    write_rpc1,
)
from .synth import SkeletonTrack, SynthConfig, gen_corpus, gen_events, render_intensity

__version__ = "0.1.0"
