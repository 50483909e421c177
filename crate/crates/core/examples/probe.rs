//! Scratch probe of designer convergence behavior at small and full scale.

use std::time::Instant;

use targex::designer::{
    design_nonstochastic, design_stochastic_baseline, relative_energy_profile, rescale_to_energy,
    DesignSpec,
};
use targex::estimate::{goal_met, info_matrix, ls_estimate};
use targex::lti::{multisine_inputs, pack_data, simulate, DisturbanceSource, MultisineDesign};
use targex::matkit::Mat;
use targex::{lti::SystemModel, matkit};

fn main() {
    if std::env::args().any(|a| a == "iters") {
        iteration_probe();
        return;
    }
    small_probe();
    paper_probe();
}

/// Per-iteration profiles and realized estimation errors for both methods,
/// dumped from one inline pass of the relaxation loop.
fn iteration_probe() {
    use targex::lmi;
    use targex::sdp::{solve, SolverConfig};

    let (truth, model0) = paper_models();
    let q = 20;
    let freqs = vec![0.0, 0.1, 0.2, 0.3, 0.4];
    let c = 0.1f64.sqrt();
    let gamma_w = 10.0;
    let d_des = Mat::identity(q);
    let br = lmi::basis_responses(&model0, &freqs, 100).unwrap();
    let d_half = lmi::goal_half(&d_des).unwrap();
    let cfg = SolverConfig::default();
    // chi²(20) at 95% times σ_w² = 0.1
    let tau = 31.410432844230918 * 0.1;

    let eval_err = |amps: &Vec<Vec<f64>>| -> f64 {
        let md = MultisineDesign::new(100, freqs.clone(), amps.clone()).unwrap();
        let u = multisine_inputs(&md);
        let traj = simulate(&truth, &u, &DisturbanceSource::StateCosine { c }, None).unwrap();
        let rec = pack_data(&traj, gamma_w);
        let theta_hat = ls_estimate(&rec).unwrap();
        theta_hat.sub(&truth.theta()).frobenius_norm()
    };

    for (name, baseline) in [("nonstochastic", false), ("stochastic", true)] {
        println!("=== {name} ===");
        let mut cand = vec![vec![(gamma_w / 5.0).sqrt()]; 5];
        for iter in 0..16 {
            let t0 = Instant::now();
            let p = if baseline {
                let (l1, _) = lmi::assemble_phi_x(&br, &cand).unwrap();
                lmi::to_gram_lmi_problem(&br, &l1, tau, &d_des).unwrap()
            } else {
                let rp = lmi::relaxation_point(&br, &cand, &d_half).unwrap();
                lmi::to_lmi_problem(&br, &rp, gamma_w, &d_des).unwrap()
            };
            let r = solve(&p, &cfg).unwrap();
            let a: Vec<Vec<f64>> = r.z[1..].iter().map(|&v| vec![v]).collect();
            let dist: f64 = cand
                .iter()
                .flatten()
                .zip(a.iter().flatten())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let energy: f64 = a.iter().flatten().map(|v| v * v).sum();
            let err = eval_err(&a);
            let profile = relative_energy_profile(&a).unwrap();
            println!(
                "iter={iter:2} [{:.1}s {} newton={}] gamma_e={:.5} energy={energy:8.4} err={err:.5} dist={dist:.3e} profile={:?}",
                t0.elapsed().as_secs_f64(),
                r.status,
                r.iterations,
                r.objective,
                profile.iter().map(|p| (p * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            );
            cand = a;
        }
    }
}

fn paper_models() -> (SystemModel, SystemModel) {
    let a = Mat::from_rows(&[
        &[0.49, 0.49, 0.0, 0.0],
        &[0.0, 0.49, 0.49, 0.0],
        &[0.0, 0.0, 0.49, 0.49],
        &[0.0, 0.0, 0.0, 0.49],
    ]);
    let b = Mat::from_rows(&[&[0.0], &[0.0], &[0.0], &[0.49]]);
    let truth = SystemModel::new(a, b).unwrap();
    let mut theta0 = truth.theta();
    for i in 0..theta0.rows() {
        theta0.set(i, 0, theta0.get(i, 0) + 5e-3);
    }
    let model0 = SystemModel::from_theta(&theta0, 4, 1).unwrap();
    (truth, model0)
}

fn small_probe() {
    let a = Mat::from_rows(&[&[0.4, 0.2], &[0.0, 0.3]]);
    let b = Mat::from_rows(&[&[0.0], &[1.0]]);
    let model = SystemModel::new(a, b).unwrap();
    let q = model.n_x() * model.n_phi();
    let mut spec = DesignSpec::new(model, 16, vec![0.0, 0.125, 0.25], 0.5, Mat::identity(q));
    spec.tol = 1e-15;
    spec.max_outer_iters = 12;
    for obj_tol in [1e-6, 1e-9] {
        spec.solver.objective_tol = obj_tol;
        let res = design_nonstochastic(&spec).unwrap();
        println!("small spec, objective_tol={obj_tol:.0e}:");
        for (i, h) in res.history.iter().enumerate() {
            println!("  iter {i}: obj={:.9}, dist={:.3e}", h.objective, h.candidate_distance);
        }
    }
}

fn paper_probe() {
    let a = Mat::from_rows(&[
        &[0.49, 0.49, 0.0, 0.0],
        &[0.0, 0.49, 0.49, 0.0],
        &[0.0, 0.0, 0.49, 0.49],
        &[0.0, 0.0, 0.0, 0.49],
    ]);
    let b = Mat::from_rows(&[&[0.0], &[0.0], &[0.0], &[0.49]]);
    let truth = SystemModel::new(a, b).unwrap();
    let mut theta0 = truth.theta();
    for i in 0..theta0.rows() {
        theta0.set(i, 0, theta0.get(i, 0) + 5e-3);
    }
    let model0 = SystemModel::from_theta(&theta0, 4, 1).unwrap();
    let q = 20;
    let freqs = vec![0.0, 0.1, 0.2, 0.3, 0.4];
    let spec = DesignSpec::new(model0, 100, freqs.clone(), 10.0, Mat::identity(q));

    let t0 = Instant::now();
    let ns = design_nonstochastic(&spec).unwrap();
    println!(
        "nonstochastic: {:.1}s, converged={}, iters={}, gamma_e={:.6}",
        t0.elapsed().as_secs_f64(),
        ns.converged,
        ns.outer_iterations,
        ns.gamma_e
    );
    for (i, h) in ns.history.iter().enumerate() {
        println!("  iter {i}: obj={:.9}, dist={:.3e}", h.objective, h.candidate_distance);
    }
    println!("  profile: {:?}", relative_energy_profile(&ns.amps).unwrap());

    let t0 = Instant::now();
    let st = design_stochastic_baseline(&spec, 0.1, 0.05).unwrap();
    println!(
        "baseline: {:.1}s, converged={}, iters={}, gamma_e={:.6}",
        t0.elapsed().as_secs_f64(),
        st.converged,
        st.outer_iterations,
        st.gamma_e
    );
    println!("  profile: {:?}", relative_energy_profile(&st.amps).unwrap());

    let st_scaled = rescale_to_energy(&st, ns.energy()).unwrap();
    let c = 0.1f64.sqrt();
    for (name, des) in [("nonstochastic", &ns), ("stochastic", &st_scaled)] {
        let md = MultisineDesign::new(100, freqs.clone(), des.amps.clone()).unwrap();
        let u = multisine_inputs(&md);
        let traj = simulate(&truth, &u, &DisturbanceSource::StateCosine { c }, None).unwrap();
        let rec = pack_data(&traj, 10.0);
        let theta_hat = ls_estimate(&rec).unwrap();
        let err = theta_hat.sub(&truth.theta()).frobenius_norm();
        let (qf, met) = goal_met(&theta_hat, &truth.theta(), &Mat::identity(q));
        let p_inv = info_matrix(&rec);
        let g = targex::estimate::fogel_radius(&rec, &theta_hat, &p_inv);
        let suff = targex::lmi::sufficiency_matrix(&rec, &Mat::identity(q), 10.0).unwrap();
        let me = matkit::min_eig(&suff).unwrap();
        let energy = des.energy();
        println!(
            "{name}: energy={energy:.4}, err={err:.6}, qf={qf:.6}, goal_met={met}, G={g:.4}, suff_min_eig={me:.3e}"
        );
    }
}
