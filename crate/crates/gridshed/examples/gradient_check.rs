//! Verify the network's analytic gradients against central finite
//! differences, for both losses and every activation.

use gridshed::learning::{gradient_check, Activation, Loss, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs_owned: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let xs: Vec<&[f64]> = xs_owned.iter().map(|v| v.as_slice()).collect();

    for activation in [Activation::Relu, Activation::Tanh, Activation::Linear] {
        // regression head: scalar output, MSE
        let net = Mlp::new_random(&[4, 8, 5, 1], activation, 17);
        let ys_owned: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.gen_range(-2.0..2.0)]).collect();
        let ys: Vec<&[f64]> = ys_owned.iter().map(|v| v.as_slice()).collect();
        let err = gradient_check(&net, &xs, &ys, Loss::Mse);
        println!("{:>6} / mse:              max rel error {err:.3e}", activation.name());
        assert!(err < 1e-5);

        // classification head: 3 logits, softmax cross-entropy
        let net = Mlp::new_random(&[4, 8, 3], activation, 29);
        let classes_owned: Vec<Vec<f64>> =
            (0..6).map(|_| vec![rng.gen_range(0..3) as f64]).collect();
        let classes: Vec<&[f64]> = classes_owned.iter().map(|v| v.as_slice()).collect();
        let err = gradient_check(&net, &xs, &classes, Loss::SoftmaxCrossEntropy);
        println!(
            "{:>6} / cross-entropy:    max rel error {err:.3e}",
            activation.name()
        );
        assert!(err < 1e-5);
    }
    println!("all analytic gradients match finite differences");
}
