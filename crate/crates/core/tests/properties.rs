use proptest::prelude::*;

use hyperpolar::bp::{bp_grid, Kernel};
use hyperpolar::channel::{add_noise, channel_llr, modulate, noiseless_llr, sigma_from_ebn0};
use hyperpolar::code::PolarCode;
use hyperpolar::neural::{Ablation, Checkpoint, Decoder, HyperParams, LearnedParams, WbpParams};
use hyperpolar::rng::{Purpose, SimRng};
use hyperpolar::sc::{sc_decode, scl_decode};
use hyperpolar::LLR_SAT;

fn code_from(mask_bits: u32, n: usize) -> PolarCode {
    let len = 1usize << n;
    PolarCode::from_frozen_mask((0..len).map(|j| (mask_bits >> j) & 1 == 1).collect()).unwrap()
}

fn frame(code: &PolarCode, db: f64, seed: u64) -> (Vec<u8>, Vec<u8>, Vec<f64>) {
    let mut rng = SimRng::new(seed, Purpose::Test, 9, 0);
    let info: Vec<u8> = (0..code.info_len()).map(|_| rng.bit()).collect();
    let u = code.source_word(&info).unwrap();
    let x = code.encode(&info).unwrap();
    let sigma = sigma_from_ebn0(db, code.rate().max(0.1));
    (u, x.clone(), channel_llr(&add_noise(&modulate(&x), sigma, &mut rng), sigma))
}

fn hyper(code: &PolarCode, iters: usize, seed: u64, scale: f64, c: f64) -> LearnedParams {
    let mut hp = HyperParams::init(code, iters, seed);
    hp.f_weights.iter_mut().for_each(|w| *w *= scale);
    hp.c = c;
    let mut rng = SimRng::new(seed, Purpose::Test, 1, 1);
    for a in hp.wbp.alpha.iter_mut().chain(hp.wbp.beta.iter_mut()) {
        *a = rng.uniform_range(0.0, 2.0);
    }
    LearnedParams::Hyper(hp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sc_and_scl_recover_noiseless_words(mask in 0u32..(1 << 16), seed in 0u64..1000) {
        let code = code_from(mask, 4);
        let (u, x, _) = frame(&code, 3.0, seed);
        let llr = noiseless_llr(&x);
        prop_assert_eq!(&sc_decode(&code, &llr, Kernel::Exact).unwrap(), &u);
        prop_assert_eq!(&sc_decode(&code, &llr, Kernel::MinSum).unwrap(), &u);
        for l in [1, 3, 8] {
            prop_assert_eq!(&scl_decode(&code, &llr, l, Kernel::Exact).unwrap().bits, &u);
        }
    }

    #[test]
    fn scl_single_path_is_sc(mask in 0u32..(1 << 16), seed in 0u64..1000, db in -1.0f64..4.0) {
        let code = code_from(mask, 4);
        let (_, _, llr) = frame(&code, db, seed);
        for kernel in [Kernel::Exact, Kernel::MinSum] {
            prop_assert_eq!(scl_decode(&code, &llr, 1, kernel).unwrap().bits, sc_decode(&code, &llr, kernel).unwrap());
        }
    }

    #[test]
    fn scl_keeps_frozen_bits_zero(mask in 0u32..(1 << 16), seed in 0u64..1000, l in 1usize..9) {
        let code = code_from(mask, 4);
        let (_, _, llr) = frame(&code, 0.0, seed);
        let out = scl_decode(&code, &llr, l, Kernel::Exact).unwrap();
        prop_assert!(out.survivors.iter().all(|&s| s >= 1 && s <= l));
        for j in 0..code.len() {
            if code.is_frozen(j) {
                prop_assert_eq!(out.bits[j], 0);
            }
        }
    }

    #[test]
    fn learned_messages_saturate(seed in 0u64..1000, scale in 0.0f64..20.0, c in 0.0f64..=1.0, db in -2.0f64..8.0) {
        let code = PolarCode::bhattacharyya(3, 4).unwrap();
        let params = hyper(&code, 3, seed, scale, c);
        let (_, _, llr) = frame(&code, db, seed);
        for kernel in [Kernel::Exact, Kernel::MinSum] {
            let grid = Decoder::new(&code, kernel, &params).unwrap().decode_grid(&llr).unwrap();
            for s in 0..=code.stages() {
                prop_assert!(grid.l_row(s).iter().chain(grid.r_row(s)).all(|v| v.is_finite() && v.abs() <= LLR_SAT));
            }
        }
    }

    #[test]
    fn learned_decoding_is_codeword_independent(seed in 0u64..1000, scale in 0.0f64..10.0, c in 0.0f64..=1.0) {
        let code = PolarCode::bhattacharyya(4, 8).unwrap();
        let params = hyper(&code, 3, seed, scale, c);
        let (u, x, llr) = frame(&code, 2.0, seed);
        let llr0: Vec<f64> = llr.iter().zip(&x).map(|(&l, &b)| if b == 1 { -l } else { l }).collect();
        let values = code.stage_values(&u);
        for kernel in [Kernel::Exact, Kernel::MinSum] {
            let dec = Decoder::new(&code, kernel, &params).unwrap();
            let (gx, g0) = (dec.decode_grid(&llr).unwrap(), dec.decode_grid(&llr0).unwrap());
            for s in 0..=code.stages() {
                for j in 0..code.len() {
                    let f = if values[s][j] == 1 { -1.0 } else { 1.0 };
                    prop_assert_eq!(gx.l(s, j), f * g0.l(s, j));
                    prop_assert_eq!(gx.r(s, j), f * g0.r(s, j));
                }
            }
        }
    }

    #[test]
    fn unit_weight_wbp_is_bp(mask in 0u32..(1 << 8), seed in 0u64..1000, iters in 1usize..6) {
        let code = code_from(mask, 3);
        let (_, _, llr) = frame(&code, 1.0, seed);
        let params = LearnedParams::Wbp(WbpParams::ones(&code, iters));
        for kernel in [Kernel::Exact, Kernel::MinSum] {
            let a = Decoder::new(&code, kernel, &params).unwrap().decode_grid(&llr).unwrap();
            let b = bp_grid(&code, &llr, iters, kernel).unwrap();
            for s in 0..=code.stages() {
                prop_assert_eq!(a.l_row(s), b.l_row(s));
                prop_assert_eq!(a.r_row(s), b.r_row(s));
            }
        }
    }

    #[test]
    fn checkpoint_bytes_round_trip(seed in 0u64..1000, c in 0.0f64..=1.0, gating in any::<bool>()) {
        let code = PolarCode::bhattacharyya(3, 4).unwrap();
        let mut params = hyper(&code, 2, seed, 1.0, c);
        if let LearnedParams::Hyper(h) = &mut params {
            h.gating = gating;
        }
        let ablation = if gating { Ablation::Full } else { Ablation::NoGating };
        let ck = Checkpoint::new(&code, Kernel::MinSum, ablation, params);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        prop_assert_eq!(back.to_bytes(), ck.to_bytes());
        prop_assert_eq!(back.params, ck.params);
    }
}
