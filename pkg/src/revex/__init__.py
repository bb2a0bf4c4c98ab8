"""revex: removal-based saliency explanations for video classifiers.

Pipeline stages: segmentation -> feature selection -> sample selection ->
feature removal -> model behavior -> summary -> visualization.  See the
README for the CLI and the acceptance suite.
"""

__version__ = "0.1.0"

from .errors import (FormatError, ParameterError, ProtocolError, RevexError,
                     SolverError, TransportError, UndefinedDropError)
from .evaluation import (GroundTruthTrack, LocalizationResult,
                         PerturbationCurve, auc, average_drop, average_iou,
                         best_iou, deletion_curve, insertion_curve,
                         iou_accuracy, pointing_accuracy, pointing_game)
from .explainers import (LimeConfig, RegionRelevance, SaliencyVolume,
                         brute_force_shapley, explain_kernel_shap,
                         explain_lime, explain_loco, explain_rise, explain_sos,
                         explain_up, relevance_to_volume)
from .perturbation import (RemovalOperator, SamplingStrategy,
                           coalition_to_soft_mask, occlusion_windows,
                           remove_features, sample_coalitions)
from .pipeline import (ExplanationResult, MethodConfig, METHODS, run_method)
from .predictors import (EchoPredictor, HFBoxPredictor, RegionLinearPredictor,
                         RemotePredictor, predict_batch)
from .segmentation import (SegmentationMap, SlicParams, grid_3d,
                           low_res_soft_grid, region_mean_color, slic_3d)
from .tensor import (BlurParams, VideoTensor, gaussian_blur_3d, read_frames,
                     read_tensor, write_frames, write_tensor)

__all__ = [name for name in dir() if not name.startswith("_")]
