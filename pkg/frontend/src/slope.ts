/** Least-squares slope of y against x. */
export function leastSquaresSlope(x: number[], y: number[]): number {
    if (x.length !== y.length || x.length < 2) {
        throw new Error("slope fit needs at least two matched points");
    }
    const n = x.length;
    const mx = x.reduce((a, b) => a + b, 0) / n;
    const my = y.reduce((a, b) => a + b, 0) / n;
    let sxx = 0;
    let sxy = 0;
    for (let i = 0; i < n; i++) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx === 0) {
        throw new Error("slope fit needs distinct abscissae");
    }
    return sxy / sxx;
}

/** Slope in log10-log10 coordinates; both inputs must be positive. */
export function logLogSlope(x: number[], y: number[]): number {
    const lx: number[] = [];
    const ly: number[] = [];
    for (let i = 0; i < x.length; i++) {
        if (x[i] > 0 && y[i] > 0) {
            lx.push(Math.log10(x[i]));
            ly.push(Math.log10(y[i]));
        }
    }
    return leastSquaresSlope(lx, ly);
}
