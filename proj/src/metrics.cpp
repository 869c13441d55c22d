#include "ds2dp/metrics.hpp"

#include <sstream>

#include "ds2dp/format.hpp"

namespace ds2dp {

MetricReport evaluate(const Cube &ref, const Cube &test, double peak) {
  MetricReport report;
  const PsnrResult p = psnr(ref, test, peak);
  report.mpsnr = p.mean;
  report.psnr = p.per_band;
  const SsimResult s = ssim(ref, test);
  report.mssim = s.mean;
  report.ssim = s.per_band;
  const SamResult a = sam(ref, test);
  report.sam = a.radians;
  report.sam_skipped = a.skipped;
  report.snr = snr(ref, test);
  return report;
}

std::string to_csv(const MetricReport &report) {
  std::ostringstream out;
  out << "metric,value\n";
  out << "mpsnr_db," << format_double(report.mpsnr) << '\n';
  out << "mssim," << format_double(report.mssim) << '\n';
  out << "sam_rad," << format_double(report.sam) << '\n';
  out << "sam_skipped," << report.sam_skipped << '\n';
  out << "snr_db," << format_double(report.snr) << '\n';
  out << '\n' << "band,psnr_db,ssim\n";
  for (std::size_t k = 0; k < report.psnr.size(); ++k)
    out << k << ',' << format_double(report.psnr[k]) << ','
        << format_double(k < report.ssim.size() ? report.ssim[k] : 0.0) << '\n';
  return out.str();
}

std::string to_summary(const MetricReport &report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "MPSNR " << report.mpsnr << " dB\n";
  out << "MSSIM " << report.mssim << '\n';
  out << "SAM   " << report.sam << " rad";
  if (report.sam_skipped > 0) out << " (" << report.sam_skipped << " zero-norm pixels skipped)";
  out << '\n';
  out << "SNR   " << report.snr << " dB\n";
  return out.str();
}

} // namespace ds2dp
