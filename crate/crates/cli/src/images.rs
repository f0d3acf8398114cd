//! restore, reconstruct, generate, corrupt and psnr.

use drbn_core::io::{read_mask, read_pgm, write_hqs_log, write_pgm};
use drbn_core::restoration::{self, reconstruct_image, restore_hqs, RestorationProblem};
use drbn_core::{ImageGray, NoiseModel};

use crate::args::{CorruptArgs, GenerateArgs, MapMethod, PsnrArgs, ReconstructArgs, RestoreArgs};
use crate::data::{ca_config, map_source, model, net_for, patch_side};
use crate::{CmdResult, Failure};

/// `text:MASKFILE` reads the overlay mask from a PGM; the other forms are
/// parsed by [`NoiseModel`].
fn parse_noise(spec: &str, image: &ImageGray) -> Result<NoiseModel, Failure> {
    if let Some(path) = spec.strip_prefix("text:") {
        let (w, h, mask) = read_mask(path)?;
        if (w, h) != (image.width, image.height) {
            return Err(Failure::data(format!(
                "text mask is {w}x{h}, image is {}x{}",
                image.width, image.height
            )));
        }
        return Ok(NoiseModel::TextOverlay { mask });
    }
    Ok(spec.parse()?)
}

pub fn restore(args: RestoreArgs, seed: u64) -> CmdResult {
    let prior = model(&args.model)?;
    let corrupted = read_pgm(&args.input)?;
    let noise = parse_noise(&args.noise, &corrupted)?;
    let mask = match (&args.mask, &noise) {
        (Some(path), _) => {
            let (w, h, mask) = read_mask(path)?;
            if (w, h) != (corrupted.width, corrupted.height) {
                return Err(Failure::data(format!("mask is {w}x{h}, image is {}x{}", corrupted.width, corrupted.height)));
            }
            Some(mask)
        }
        (None, NoiseModel::TextOverlay { mask }) => Some(mask.clone()),
        (None, _) => None,
    };
    let clean = args.clean.as_ref().map(read_pgm).transpose()?;
    let mut problem = RestorationProblem::new(corrupted, noise, mask);
    problem.patch_size = patch_side(prior.n_visible())?;
    problem.stride = args.stride;
    if let Some(l) = args.lambda {
        problem.lambda = l;
    }
    if let Some(b) = args.beta_schedule {
        problem.beta_schedule = b;
    }
    problem.validate()?;
    if !matches!(args.inference.map_method, MapMethod::Ca | MapMethod::Augca) {
        return Err(Failure::config("restore supports --map-method ca or augca"));
    }
    let net = net_for(&args.inference, &prior, seed)?;
    let source = map_source(&args.inference, net.as_ref(), seed)?;
    let (restored, log) = restore_hqs(&problem, &prior, &source, clean.as_ref(), seed)?;
    write_pgm(&args.out, &restored)?;
    if let Some(path) = &args.log {
        write_hqs_log(path, &log)?;
    }
    match clean {
        Some(c) => println!(
            "restored {}x{} image in {} steps: PSNR {:.2} dB (corrupted {:.2} dB); wrote {}",
            restored.width,
            restored.height,
            log.len(),
            restoration::psnr(&restored, &c)?,
            restoration::psnr(&problem.corrupted.clamped(), &c)?,
            args.out.display()
        ),
        None => println!(
            "restored {}x{} image in {} steps; wrote {}",
            restored.width,
            restored.height,
            log.len(),
            args.out.display()
        ),
    }
    Ok(())
}

pub fn reconstruct(args: ReconstructArgs, seed: u64) -> CmdResult {
    let params = model(&args.model)?;
    let image = read_pgm(&args.input)?;
    let net = match args.inference.map_method {
        MapMethod::Ca => None,
        MapMethod::Augca => net_for(&args.inference, &params, seed)?,
        other => return Err(Failure::config(format!("reconstruct supports ca and augca, not {other:?}"))),
    };
    let cfg = ca_config(&args.inference, seed);
    cfg.validate()?;
    if args.stride == 0 {
        return Err(Failure::config("--stride must be at least 1"));
    }
    let out = reconstruct_image(&image, &params, net.as_ref(), &cfg, args.stride)?;
    write_pgm(&args.out, &out)?;
    println!(
        "reconstructed {}x{} image: PSNR {:.2} dB against the input; wrote {}",
        out.width,
        out.height,
        restoration::psnr(&out.clamped(), &image)?,
        args.out.display()
    );
    Ok(())
}

pub fn generate(args: GenerateArgs, seed: u64) -> CmdResult {
    let params = model(&args.model)?;
    let n = params.n_visible();
    let width = match args.width {
        Some(w) if w > 0 && n % w == 0 => w,
        Some(w) => return Err(Failure::config(format!("width {w} does not divide {n} visible units"))),
        None => patch_side(n)?,
    };
    if args.count == 0 {
        return Err(Failure::config("--count must be at least 1"));
    }
    let images = restoration::generate(&params, seed, args.count, width, n / width)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::data(format!("cannot create {}: {e}", args.out.display())))?;
    for (m, img) in images.iter().enumerate() {
        write_pgm(args.out.join(format!("sample-{m:04}.pgm")), img)?;
    }
    println!("generated {} {}x{} samples into {}", images.len(), width, n / width, args.out.display());
    Ok(())
}

pub fn corrupt(args: CorruptArgs, seed: u64) -> CmdResult {
    let image = read_pgm(&args.input)?;
    let noise = parse_noise(&args.noise, &image)?;
    let (out, mask) = restoration::corrupt(&image, &noise, seed)?;
    let out = out.clamped();
    write_pgm(&args.out, &out)?;
    if let Some(path) = &args.mask_out {
        let pixels = mask.iter().map(|&m| f64::from(m)).collect();
        write_pgm(path, &ImageGray::new(image.width, image.height, pixels)?)?;
    }
    println!(
        "corrupted {} of {} pixels: PSNR {:.2} dB; wrote {}",
        mask.iter().filter(|&&m| m).count(),
        mask.len(),
        restoration::psnr(&out, &image)?,
        args.out.display()
    );
    Ok(())
}

pub fn psnr(args: PsnrArgs) -> CmdResult {
    let a = read_pgm(&args.a)?;
    let b = read_pgm(&args.b)?;
    println!("{:.2}", restoration::psnr(&a, &b)?);
    Ok(())
}
