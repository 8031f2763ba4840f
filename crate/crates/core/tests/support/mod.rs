pub mod ivt;
