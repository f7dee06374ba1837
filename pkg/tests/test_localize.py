import numpy as np
import pytest

from vocseg.cluster import labels_to_masks
from vocseg.localize import (MorphParams, clean_mask, connected_components,
                             extract_objects)


def blank(h=20, w=20):
    return np.zeros((h, w), dtype=bool)


# ---------------------------------------------------------------- clean_mask

def test_clean_empty_stays_empty():
    p = MorphParams()
    assert not clean_mask(blank(), p).any()


def test_single_pixel_removed_by_opening():
    mask = blank()
    mask[10, 10] = True
    out = clean_mask(mask, MorphParams(opening_se=1, dilation_se=0))
    assert not out.any()


def test_solid_block_opens_then_dilates():
    mask = blank(11, 11)
    mask[3:8, 3:8] = True  # 5x5 block
    out = clean_mask(mask, MorphParams(opening_se=1, dilation_se=1))
    expected = blank(11, 11)
    expected[2:9, 2:9] = True  # 7x7
    assert np.array_equal(out, expected)


def test_opening_idempotent():
    rng = np.random.default_rng(0)
    mask = rng.random((40, 40)) > 0.6
    p = MorphParams(opening_se=1, dilation_se=0)
    once = clean_mask(mask, p)
    assert np.array_equal(clean_mask(once, p), once)


def test_dilation_stage_superset_of_opening_stage():
    rng = np.random.default_rng(1)
    mask = rng.random((40, 40)) > 0.5
    opened = clean_mask(mask, MorphParams(opening_se=1, dilation_se=0))
    full = clean_mask(mask, MorphParams(opening_se=1, dilation_se=1))
    assert (full | opened).sum() == full.sum()


def test_morph_params_validation():
    with pytest.raises(ValueError):
        MorphParams(opening_se=-1)
    with pytest.raises(ValueError):
        MorphParams(min_area_fraction=1.0)


# ------------------------------------------------------ connected components

def test_components_empty_mask():
    assert connected_components(blank()) == []


def test_components_full_block():
    mask = np.ones((4, 4), dtype=bool)
    comps = connected_components(mask)
    assert len(comps) == 1
    _, area, bbox = comps[0]
    assert area == 16
    assert bbox == (0, 0, 3, 3)


def test_components_diagonal_touch_is_one_component():
    mask = blank(4, 4)
    mask[0, 0] = mask[1, 1] = True
    comps = connected_components(mask)
    assert len(comps) == 1
    assert comps[0][1] == 2


def test_components_sorted_by_area_and_sum_preserved():
    mask = blank(20, 20)
    mask[1:3, 1:3] = True       # 4 px
    mask[10:16, 10:16] = True   # 36 px
    comps = connected_components(mask)
    assert [c[1] for c in comps] == [36, 4]
    assert sum(c[1] for c in comps) == mask.sum()


# ------------------------------------------------------------ extract_objects

def _image(h, w):
    rng = np.random.default_rng(3)
    return rng.integers(0, 255, size=(h, w, 3), dtype=np.uint8)


def test_whole_image_cluster_gives_full_bbox():
    seg = labels_to_masks(np.zeros(12, dtype=int), (3, 4), (30, 40), k=1)
    objs = extract_objects(_image(30, 40), seg, MorphParams(min_area_px=1))
    assert len(objs) == 1
    assert objs[0].bbox == (0, 0, 39, 29)
    assert objs[0].crop.shape == (30, 40, 3)


def test_small_region_discarded_by_fraction_floor():
    # 10 px blob in 640x480: fraction 0.001 floors at 307 px
    p = MorphParams(opening_se=0, dilation_se=0, min_area_fraction=0.001, min_area_px=50)
    assert p.effective_min_area((480, 640)) == 307
    labels = np.zeros((480, 640), dtype=int)
    labels[100:102, 100:105] = 1
    seg = labels_to_masks(labels.ravel(), (480, 640), (480, 640), k=2)
    objs = extract_objects(_image(480, 640), seg, p)
    assert all(o.cluster_id == 0 for o in objs)  # the 10 px cluster-1 blob is gone


def test_two_blobs_same_cluster_become_two_objects():
    labels = np.zeros((40, 40), dtype=int)
    labels[5:15, 5:15] = 1
    labels[25:35, 25:35] = 1
    seg = labels_to_masks(labels.ravel(), (40, 40), (40, 40), k=2)
    p = MorphParams(opening_se=0, dilation_se=0, min_area_fraction=0.0, min_area_px=10)
    objs = extract_objects(_image(40, 40), seg, p)
    from_cluster1 = [o for o in objs if o.cluster_id == 1]
    assert len(from_cluster1) == 2


def test_objects_ordered_by_cluster_then_area_desc():
    labels = np.zeros((60, 60), dtype=int)
    labels[2:10, 2:10] = 1        # 64 px
    labels[20:40, 20:50] = 1      # 600 px
    labels[45:58, 5:50] = 0
    seg = labels_to_masks(labels.ravel(), (60, 60), (60, 60), k=2)
    p = MorphParams(opening_se=0, dilation_se=0, min_area_fraction=0.0, min_area_px=20)
    objs = extract_objects(_image(60, 60), seg, p)
    clusters = [o.cluster_id for o in objs]
    assert clusters == sorted(clusters)
    c1 = [o.area for o in objs if o.cluster_id == 1]
    assert c1 == sorted(c1, reverse=True)


def test_component_mask_within_cleaned_cluster_and_area_threshold():
    rng = np.random.default_rng(9)
    labels = (rng.random((50, 50)) > 0.5).astype(int)
    seg = labels_to_masks(labels.ravel(), (50, 50), (50, 50), k=2)
    p = MorphParams()
    min_area = p.effective_min_area((50, 50))
    for obj in extract_objects(_image(50, 50), seg, p):
        assert obj.area >= min_area
        cleaned = clean_mask(seg.masks[obj.cluster_id], p)
        x0, y0, x1, y1 = obj.bbox
        inside = cleaned[y0:y1 + 1, x0:x1 + 1]
        assert (obj.component_mask & ~inside).sum() == 0


def test_extract_objects_shape_mismatch():
    seg = labels_to_masks(np.zeros(4, dtype=int), (2, 2), (4, 4), k=1)
    with pytest.raises(ValueError):
        extract_objects(_image(5, 5), seg)
