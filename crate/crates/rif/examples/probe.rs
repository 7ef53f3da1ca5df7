use rif::bank::{build_bank, nn_distance};
use rif::features::{BaselineExtractor, FeatureExtractor};
use rif::geometry::{pcm_map, Point3};
use rif::io::synth::{generate_category, GenSpec};
use rif::sampling::{fps, knn_group};

fn main() {
    let spec = GenSpec::default();
    let cat = generate_category(0, &spec, 0);
    let train: Vec<(String, rif::geometry::PointCloud)> =
        cat.train.iter().map(|s| (s.stem.clone(), s.cloud.clone())).collect();
    let bank = build_bank(&train, &BaselineExtractor, 128, 128).unwrap();

    // master position of point 617 in canonical coords of test_004
    let t4 = &cat.test[4];
    let m4 = pcm_map(&t4.cloud).unwrap();
    let p617 = m4.cloud.points()[617];
    println!("point 617 canonical pos: ({:.3},{:.3},{:.3}) |r|={:.3}", p617.x, p617.y, p617.z, p617.norm());
    let anchors = [m4.cloud.points()[2045], m4.cloud.points()[2046], m4.cloud.points()[2047]];
    for (i, a) in anchors.iter().enumerate() {
        println!("  anchor{} at ({:.3},{:.3},{:.3}), dist to 617: {:.3}", i, a.x, a.y, a.z, p617.dist(a));
    }

    // nearest TRAIN FPS center to 617's position, per train sample
    for (name, cloud) in &train {
        let m = pcm_map(cloud).unwrap();
        let centers = fps(&m.cloud, 128).center_indices;
        let (best_c, best_d) = centers
            .iter()
            .map(|&c| (c, m.cloud.points()[c].dist(&p617)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        println!("{name}: nearest center to 617-pos is {best_c} at {:.3}", best_d);
    }

    // descriptor distance: test_004 group@617 vs train group at the nearest covering center
    let g_test = knn_group(&m4.cloud, 617, 128);
    let f_test = BaselineExtractor.extract(&g_test).unwrap();
    let (d, idx) = nn_distance(&bank, &f_test).unwrap();
    println!("nn dist {:.3} -> {}:{}", d, bank.provenance()[idx].sample_id, bank.provenance()[idx].center_index);

    // feature-space decomposition of the nn mismatch
    let m0 = pcm_map(&train[0].1).unwrap();
    let g_train = knn_group(&m0.cloud, 47, 128);
    let f_train = BaselineExtractor.extract(&g_train).unwrap();
    let seg = |f: &[f32], lo: usize, hi: usize| -> Vec<f32> { f[lo..hi].to_vec() };
    let l2 = |a: &[f32], b: &[f32]| -> f64 {
        a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt()
    };
    println!("  evals: {:.3}  stats: {:.3}  dist-hist: {:.3}  elev-hist: {:.3}",
        l2(&seg(&f_test,0,3), &seg(&f_train,0,3)),
        l2(&seg(&f_test,3,5), &seg(&f_train,3,5)),
        l2(&seg(&f_test,5,21), &seg(&f_train,5,21)),
        l2(&seg(&f_test,21,33), &seg(&f_train,21,33)));
}
