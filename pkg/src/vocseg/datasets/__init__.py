from .common import CanonicalDataset, DatasetSample, rasterize_polygon
from .coco import decode_uncompressed_rle, load_coco
from .voc import VOC_CLASSES, load_voc
from .canonical import load_canonical, write_canonical

__all__ = [
    "CanonicalDataset",
    "DatasetSample",
    "VOC_CLASSES",
    "decode_uncompressed_rle",
    "load_canonical",
    "load_coco",
    "load_voc",
    "rasterize_polygon",
    "write_canonical",
]
