//! Prune a dense weight matrix to 2:4, pack it into per-TPE blocks and
//! unpack it again.

use sta_selftest::sparsity::prune_matrix;
use sta_selftest::{densify, pack_tile, prune_to_nm, validate_nm, Matrix};

fn main() -> sta_selftest::Result<()> {
    let block = prune_to_nm(&[5, -7, 1, 7], 2);
    println!("block [5, -7, 1, 7] keeps {:?} at {:?}", block.values, block.indexes);

    let w = Matrix::from_fn(8, 3, |r, c| ((r as i64 * 5 + c as i64 * 3) % 11) - 5);
    println!("dense W (8x3), 2:4 already? {}", validate_nm(&w, 4, 2));

    let pruned = prune_matrix(&w, 4, 2)?;
    let tile = pack_tile(&w, 4, 2)?;
    println!(
        "packed into {}x{} blocks, non-zero ratio {:.3}",
        tile.rows(),
        tile.cols(),
        tile.nonzero_ratio()
    );
    for r in 0..tile.rows() {
        for c in 0..tile.cols() {
            let b = tile.block(r, c);
            println!("  TPE({r},{c}) values {:?} indexes {:?}", b.values, b.indexes);
        }
    }
    assert_eq!(densify(&tile), pruned);
    assert!(validate_nm(&pruned, 4, 2));
    println!("densify(pack(W)) == prune(W)");
    Ok(())
}
