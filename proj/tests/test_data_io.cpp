#include <gtest/gtest.h>

#include <sstream>

#include "gloss/data_io.hpp"

using namespace gloss;

namespace {

const ZoneIndex kZones({"Z1", "Z2"});

IngestOptions two_weeks() {
  IngestOptions o;
  o.calendar = Calendar::from_string("2018-01-01", 2);
  return o;
}

}  // namespace

TEST(Csv, QuotedFieldsAndLineNumbers) {
  std::istringstream in("a,b\n\"x, y\",\"he said \"\"hi\"\"\"\n\"multi\nline\",2\nlast,3\r\n");
  CsvReader csv(in);
  std::vector<std::string> row;
  ASSERT_TRUE(csv.next(row));
  ASSERT_TRUE(csv.next(row));
  EXPECT_EQ(row, (std::vector<std::string>{"x, y", "he said \"hi\""}));
  ASSERT_TRUE(csv.next(row));
  EXPECT_EQ(row[0], "multi\nline");
  EXPECT_EQ(csv.line(), 3);
  ASSERT_TRUE(csv.next(row));
  EXPECT_EQ(row, (std::vector<std::string>{"last", "3"}));
  EXPECT_EQ(csv.line(), 5);
  EXPECT_FALSE(csv.next(row));
}

TEST(Ingest, EmptyStream) {
  std::istringstream in("");
  const auto r = ingest(in, kZones, two_weeks());
  EXPECT_EQ(r.counts.shape(), (Shape{24, 7, 2, 2}));
  EXPECT_EQ(r.counts.vec().sum(), 0.0);
  EXPECT_EQ(r.report.accepted, 0);
}

TEST(Ingest, SingleRecordAtEpoch) {
  std::istringstream in("timestamp,zone_id\n2018-01-01 00:00:00,Z1\n");
  const auto r = ingest(in, kZones, two_weeks());
  EXPECT_EQ(r.counts(0, 0, 0, 0), 1.0);
  EXPECT_EQ(r.counts.vec().sum(), 1.0);
  EXPECT_TRUE(r.omega.is_full());
}

TEST(Ingest, HandFixture) {
  std::istringstream in(
      "id,timestamp,zone_id\n"
      "1,2018-01-01 08:15:00,Z1\n"
      "2,2018-01-01 08:59:59,Z1\n"
      "3,2018-01-01 09:00:00,Z1\n"
      "4,2018-01-03 23:30:00,Z2\n"
      "5,2018-01-08 08:10:00,Z1\n"   // day 0 of week 1
      "6,2018-01-14 12:00:00,Z2\n"   // last day of week 1
      "7,2018-01-15 12:00:00,Z2\n"   // after the covered weeks
      "8,2017-12-31 12:00:00,Z2\n"   // before the epoch
      "9,2018-01-05 10:00:00,Z9\n"   // not whitelisted
      "10,2018-01-03 23:00:00, Z2 \n");
  const auto r = ingest(in, kZones, two_weeks());
  EXPECT_EQ(r.counts(8, 0, 0, 0), 2.0);
  EXPECT_EQ(r.counts(9, 0, 0, 0), 1.0);
  EXPECT_EQ(r.counts(23, 2, 0, 1), 2.0);
  EXPECT_EQ(r.counts(8, 0, 1, 0), 1.0);
  EXPECT_EQ(r.counts(12, 6, 1, 1), 1.0);
  EXPECT_EQ(r.counts.vec().sum(), 7.0);
  EXPECT_EQ(r.report.accepted, 7);
  EXPECT_EQ(r.report.out_of_range, 2);
  EXPECT_EQ(r.report.unknown_zone, 1);
  EXPECT_EQ(r.report.malformed, 0);
}

TEST(Ingest, BadRowPolicies) {
  const std::string text =
      "timestamp,zone_id\n"
      "2018-01-01 01:00:00,Z1\n"
      "yesterday,Z1\n"
      "2018-01-02 01:00:00\n"
      "2018-01-02 02:00:00,Z2\n";
  IngestOptions o = two_weeks();
  o.bad_rows = BadRowPolicy::skip;
  std::istringstream a(text);
  const auto r = ingest(a, kZones, o);
  EXPECT_EQ(r.report.accepted, 2);
  EXPECT_EQ(r.report.malformed, 2);
  EXPECT_EQ(r.report.malformed_lines, (std::vector<Index>{3, 4}));

  o.bad_rows = BadRowPolicy::fail;
  std::istringstream b(text);
  try {
    ingest(b, kZones, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Ingest, MissingColumnsAndIdempotence) {
  std::istringstream bad("when,where\n2018-01-01 00:00:00,Z1\n");
  try {
    ingest(bad, kZones, two_weeks());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape_mismatch);
  }
  const std::string text = "zone_id,timestamp\nZ2,2018-01-04 05:06:07\nZ1,2018-01-09 17:00:00\n";
  std::istringstream a(text), b(text);
  EXPECT_EQ(ingest(a, kZones, two_weeks()).counts, ingest(b, kZones, two_weeks()).counts);
}

TEST(Ingest, CustomColumnsAndFormat) {
  IngestOptions o = two_weeks();
  o.timestamp_column = "pickup";
  o.zone_column = "loc";
  o.timestamp_format = "%d/%m/%Y %H:%M";
  std::istringstream in("loc,pickup\nZ2,02/01/2018 13:45\n");
  const auto r = ingest(in, kZones, o);
  EXPECT_EQ(r.counts(13, 1, 0, 1), 1.0);
}

TEST(Calendar, LocateAndInverse) {
  const Calendar c;
  EXPECT_EQ(format_date(c.epoch), "2018-01-01");
  const auto cell = c.locate(*parse_date("2018-03-15"), 7);
  ASSERT_TRUE(cell.has_value());
  // 2018-03-15 is day 73 after the epoch: week 10, day 3.
  EXPECT_EQ(cell->week, 10);
  EXPECT_EQ(cell->day, 3);
  EXPECT_EQ(cell->hour, 7);
  EXPECT_EQ(format_date(c.date_of(3, 10)), "2018-03-15");
  EXPECT_FALSE(c.locate(*parse_date("2018-12-31")).has_value());  // day 364 = week 52
  EXPECT_TRUE(c.locate(*parse_date("2018-12-30")).has_value());
  EXPECT_FALSE(parse_date("2018-02-30").has_value());
  EXPECT_FALSE(parse_date("2018-02-03x").has_value());
  EXPECT_THROW(Calendar::from_string("soon"), Error);
}

TEST(ZoneIndexTest, ReadFindAndDuplicates) {
  std::istringstream in("# zones\nA\n\n  B \nC\n");
  const ZoneIndex z = ZoneIndex::read(in);
  EXPECT_EQ(z.size(), 3);
  EXPECT_EQ(z.find("B"), 1);
  EXPECT_FALSE(z.find("D").has_value());
  EXPECT_THROW(ZoneIndex({"A", "A"}), Error);
  std::istringstream empty("");
  EXPECT_THROW(ingest(empty, ZoneIndex{}), Error);
}

TEST(Stats, HandFixture) {
  // 2x2x2x2 tensor with values 0..15 in storage order.
  DenseTensor t({2, 2, 2, 2});
  for (Index i = 0; i < 16; ++i) t[i] = static_cast<double>(i);
  const DatasetStats s = dataset_stats(t);
  // A mode-n row fixes index n; its 8 values are a + sum over the other modes of
  // {0, stride_k}, so the population variance is sum (stride_k / 2)^2.
  const double strides[4] = {1, 2, 4, 8};
  for (int n = 0; n < 4; ++n) {
    double var = 0.0;
    for (int k = 0; k < 4; ++k)
      if (k != n) var += 0.25 * strides[k] * strides[k];
    EXPECT_NEAR(s.mean_row_std[n], std::sqrt(var), 1e-12) << n;
  }
  EXPECT_DOUBLE_EQ(s.sparsity, 1.0 / 16.0);
  EXPECT_EQ(s.max, 15.0);
  EXPECT_EQ(s.mean, 7.5);

  const DatasetStats c = dataset_stats(DenseTensor({3, 2, 2}, 4.0));
  for (double v : c.mean_row_std) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(c.sparsity, 0.0);
  const DatasetStats z = dataset_stats(DenseTensor({3, 2, 2}));
  EXPECT_EQ(z.sparsity, 1.0);
  EXPECT_EQ(z.max, 0.0);
}

TEST(Events, ReadAndValidate) {
  std::istringstream in(
      "zone_id,date,start_hour,end_hour,name\n"
      "Z1,2018-02-01,18,22,\"Concert, arena\"\n"
      "Z2,2018-03-04,0,0,Parade\n");
  const EventList e = read_events(in);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].name, "Concert, arena");
  EXPECT_EQ(e[0].start_hour, 18);
  EXPECT_EQ(e[0].end_hour, 22);
  EXPECT_EQ(format_date(e[1].date), "2018-03-04");

  std::istringstream backwards("zone_id,date,start_hour,end_hour,name\nZ1,2018-02-01,5,4,x\n");
  EXPECT_THROW(read_events(backwards), Error);
  std::istringstream missing("zone_id,date,start_hour,name\n");
  EXPECT_THROW(read_events(missing), Error);
}
