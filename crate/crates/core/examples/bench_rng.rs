use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 50_000_000u64;

    let t = Instant::now();
    let mut acc = 0u64;
    for _ in 0..n {
        acc = acc.wrapping_add(rng.random::<u32>() as u64);
    }
    black_box(acc);
    println!("raw u32:            {:.2} ns", t.elapsed().as_nanos() as f64 / n as f64);

    let t = Instant::now();
    let mut acc = 0u64;
    for _ in 0..n {
        acc = acc.wrapping_add(rng.random::<u64>());
    }
    black_box(acc);
    println!("raw u64:            {:.2} ns", t.elapsed().as_nanos() as f64 / n as f64);

    let t = Instant::now();
    let mut acc = 0u64;
    for i in 0..n {
        let count = 2 + (i % 5) as u32;
        acc = acc.wrapping_add(rng.random_range(0..count) as u64);
    }
    black_box(acc);
    println!("random_range(u32):  {:.2} ns", t.elapsed().as_nanos() as f64 / n as f64);

    let t = Instant::now();
    let mut acc = 0u64;
    for i in 0..n {
        let count = 2 + (i % 5) as u32;
        let x = rng.random::<u32>();
        let m = (x as u64) * (count as u64);
        let lo = m as u32;
        let r = if lo < count {
            let t = count.wrapping_neg() % count;
            if lo < t {
                // rare unbiased redraw
                loop {
                    let x = rng.random::<u32>();
                    let m = (x as u64) * (count as u64);
                    if (m as u32) >= t {
                        break (m >> 32) as u32;
                    }
                }
            } else {
                (m >> 32) as u32
            }
        } else {
            (m >> 32) as u32
        };
        acc = acc.wrapping_add(r as u64);
    }
    black_box(acc);
    println!("hand lemire u32:    {:.2} ns", t.elapsed().as_nanos() as f64 / n as f64);

    let t = Instant::now();
    let mut acc = 0u64;
    for _ in 0..n {
        acc = acc.wrapping_add(rng.random::<bool>() as u64);
    }
    black_box(acc);
    println!("bool:               {:.2} ns", t.elapsed().as_nanos() as f64 / n as f64);

    let t = Instant::now();
    let mut acc = 0.0f64;
    for _ in 0..n {
        acc += rng.random::<f64>();
    }
    black_box(acc);
    println!("f64:                {:.2} ns", t.elapsed().as_nanos() as f64 / n as f64);
}
