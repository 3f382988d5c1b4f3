"""Smoke test for the scwls Python bindings.

Build and install first, e.g.
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/scwls-*.whl
"""

import json

import scwls


def main():
    clean = scwls.Scene.generate(1, outlier_fraction=0.0, pixel_noise_sigma=0.0, coord_noise_sigma=0.0)
    t_err, r_err = scwls.pose_error(scwls.wdlt_solve(clean), clean.gt_pose)
    assert t_err < 1e-6 and r_err < 1e-6, (t_err, r_err)

    scene = scwls.Scene.generate(3)
    assert len(scene) == 100 and sum(scene.outlier_mask) == 30
    assert scwls.Scene.from_json(scene.to_json()).to_json() == scene.to_json()

    fit = scwls.fit_weights(scene, mode="regression-only", iterations=2000)
    auc = scwls.ranking_auc(fit.weights, scene.outlier_mask)
    assert auc > 0.9, auc
    fitted = scwls.wdlt_solve(scene, fit.weights)

    ransac, inliers = scwls.ransac_dlt(scene, seed=3)
    refined = scwls.lm_refine(scene, ransac)
    print("fitted-weight DLT error:", scwls.pose_error(fitted, scene.gt_pose))
    print("RANSAC + LM error:      ", scwls.pose_error(refined, scene.gt_pose), f"({len(inliers)} inliers)")

    pose = json.loads(refined.to_json())
    assert len(pose["R"]) == 9 and len(pose["t"]) == 3

    try:
        scwls.wdlt_solve(scene, [0.0] * len(scene))
    except ValueError as e:
        print("rejected all-zero weights:", e)
    else:
        raise AssertionError("all-zero weights must be rejected")
    print("smoke test passed")


if __name__ == "__main__":
    main()
