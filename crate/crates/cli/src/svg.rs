/// Line chart of win proportion against sample size, one line per candidate `K`.
pub fn sweep_chart(title: &str, ns: &[usize], candidates: &[usize], proportions: &[Vec<f64>]) -> String {
    const W: f64 = 560.0;
    const H: f64 = 360.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 7] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
    ];
    let px = |i: usize| {
        M + (W - 2.0 * M)
            * if ns.len() > 1 {
                i as f64 / (ns.len() - 1) as f64
            } else {
                0.5
            }
    };
    let py = |p: f64| H - M - (H - 2.0 * M) * p;

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\" font-family=\"sans-serif\">{title}</text>\n",
        W / 2.0
    );
    s += &format!(
        "<line x1=\"{M}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = H - M,
        r = W - M
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        s += &format!(
            "<text x=\"{}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{tick:.2}</text>\n",
            M - 6.0,
            py(tick) + 4.0
        );
    }
    for (i, n) in ns.iter().enumerate() {
        s += &format!(
            "<text x=\"{:.1}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">n={n}</text>\n",
            px(i),
            H - M + 18.0
        );
    }
    for (c, k) in candidates.iter().enumerate() {
        let color = COLORS[c % COLORS.len()];
        let pts: Vec<String> = proportions
            .iter()
            .enumerate()
            .map(|(i, row)| format!("{:.1},{:.1}", px(i), py(row[c])))
            .collect();
        s += &format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        );
        s += &format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\" font-family=\"sans-serif\">K={k}</text>\n",
            W - M + 6.0,
            M + 14.0 * c as f64
        );
    }
    s += "</svg>\n";
    s
}
