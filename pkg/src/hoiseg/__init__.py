"""Hand-object interaction segmentation, similarity, clustering and anomaly monitoring."""
from .scene_model import (
    HandObservation, HandSpec, Kind, ObjectCatalog, ObjectObservation, ObjectSpec, Params,
    SceneFrame, VideoObjectId,
)
from .pipeline import encode_stream, online_events, segment_stream
from .segmenter import segment
from .similarity import confidence_matrix, dtw_barycenter, dtw_distance
from .clustering import context_clusters, elbow_select, ensemble_merge, kmeans_dtw, wcss_curve
from .anomaly import NominalJob, monitor_segmentation, run_monitor, train_nominal

__version__ = "0.1.0"
